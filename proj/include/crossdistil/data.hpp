#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crossdistil/rng.hpp"

namespace crossdistil {

enum class Task { A, B };

inline const char* task_name(Task t) { return t == Task::A ? "a" : "b"; }

/// One training record: a categorical id per field plus the two binary labels.
struct Sample {
  std::vector<std::size_t> field_ids;
  int y_a = 0;
  int y_b = 0;

  int label(Task t) const { return t == Task::A ? y_a : y_b; }
};

enum class SplitTag : std::uint8_t { Train = 0, Valid = 1, Test = 2 };

/// Field schema. Vocabulary size of a field is at least 1 + the largest id
/// stored in it.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<std::string> field_names, std::vector<std::size_t> vocab_sizes);

  // Validates field count and id ranges.
  void add(Sample s);

  const std::vector<Sample>& samples() const { return samples_; }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  std::size_t field_count() const { return field_names_.size(); }
  const std::vector<std::string>& field_names() const { return field_names_; }
  const std::vector<std::size_t>& vocab_sizes() const { return vocab_sizes_; }

  std::vector<int> labels(Task t) const;
  std::size_t positives(Task t) const;

  // Rows selected by index, same schema.
  Dataset subset(std::span<const std::size_t> indices) const;

  // Optional per-row split assignment read from a `split` column.
  const std::optional<std::vector<SplitTag>>& split_tags() const { return split_tags_; }
  void set_split_tags(std::vector<SplitTag> tags);

  // Mutable label access for corruption.
  void set_label(std::size_t row, Task t, int value);

 private:
  std::vector<std::string> field_names_;
  std::vector<std::size_t> vocab_sizes_;
  std::vector<Sample> samples_;
  std::optional<std::vector<SplitTag>> split_tags_;
};

struct CsvSchema {
  std::vector<std::string> field_names;
  std::vector<std::size_t> vocab_sizes;
};

// Header `f_<name>,...,label_a,label_b[,split]`. Without a schema, each
// field's vocabulary is inferred as 1 + max id.
Dataset load_csv(const std::filesystem::path& path,
                 const std::optional<CsvSchema>& schema = std::nullopt);
Dataset parse_csv(const std::string& text, const std::optional<CsvSchema>& schema = std::nullopt);
void write_csv(const Dataset& ds, const std::filesystem::path& path);
std::string to_csv(const Dataset& ds);

/// Index subsets by label combination. The four base subsets are disjoint and
/// cover the dataset; the unions are sorted ascending.
struct LabelPartition {
  std::vector<std::size_t> pp, pm, mp, mm;  // (y_a, y_b) = (1,1), (1,0), (0,1), (0,0)
  std::vector<std::size_t> pos_a, neg_a;    // D^{+.}, D^{-.}
  std::vector<std::size_t> pos_b, neg_b;    // D^{.+}, D^{.-}

  const std::vector<std::size_t>& positives(Task t) const { return t == Task::A ? pos_a : pos_b; }
  const std::vector<std::size_t>& negatives(Task t) const { return t == Task::A ? neg_a : neg_b; }
  bool has_all_quadrants() const {
    return !pp.empty() && !pm.empty() && !mp.empty() && !mm.empty();
  }
};

LabelPartition partition(const Dataset& ds);

struct QuadrupletBatch {
  std::vector<std::size_t> pp, pm, mp, mm;
};

struct PairBatch {
  std::vector<std::size_t> pos, neg;
};

// Bootstrap draws: uniform with replacement. Throw DegenerateLabels when a
// required subset is empty.
QuadrupletBatch sample_quadruplets(const LabelPartition& p, std::size_t batch, Rng& rng);
PairBatch sample_pairs(const LabelPartition& p, Task task, std::size_t batch, Rng& rng);
std::vector<std::size_t> sample_uniform(std::size_t n, std::size_t batch, Rng& rng);

// ---- synthetic correlated feedback ----

struct SynthConfig {
  std::size_t n_users = 200;
  std::size_t n_items = 400;
  std::size_t n_context_fields = 2;
  std::size_t context_vocab = 8;
  std::size_t dim = 8;
  double rho = 0.7;
  double rate_a = 0.3;
  double rate_b = 0.2;
  std::size_t n_samples = 50000;
  double utility_scale = 2.0;   // std-dev of the latent utility before bias
  double main_effect_std = 0.5; // per-id additive effects relative to the interaction
  double noise = 0.0;           // independent per-sample utility noise
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticData {
  Dataset dataset;
  std::vector<double> u_a;
  std::vector<double> u_b;
  double bias_a = 0.0;
  double bias_b = 0.0;
};

SyntheticData generate_synthetic(const SynthConfig& cfg);
void write_utilities(const SyntheticData& data, const std::filesystem::path& path);

// Swaps the task label of floor(ratio * P) uniformly chosen positives with an
// equal-size uniform set of negatives. The other task is untouched.
Dataset corrupt_labels(const Dataset& ds, Task task, double ratio, Rng& rng);

struct SplitFractions {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

struct DataSplit {
  Dataset train;
  Dataset valid;
  Dataset test;
};

// Seeded random split; the three parts are disjoint and cover the dataset.
DataSplit random_split(const Dataset& ds, const SplitFractions& fr, std::uint64_t seed);
// Split by the dataset's split column.
DataSplit column_split(const Dataset& ds);

}  // namespace crossdistil
