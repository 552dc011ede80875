#include "crossdistil/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "crossdistil/errors.hpp"
#include "crossdistil/numgrad.hpp"

namespace crossdistil {

// ---- Dataset ----

Dataset::Dataset(std::vector<std::string> field_names, std::vector<std::size_t> vocab_sizes)
    : field_names_(std::move(field_names)), vocab_sizes_(std::move(vocab_sizes)) {
  if (field_names_.size() != vocab_sizes_.size()) {
    throw ConfigError("dataset: " + std::to_string(field_names_.size()) + " field names but " +
                      std::to_string(vocab_sizes_.size()) + " vocabulary sizes");
  }
}

void Dataset::add(Sample s) {
  if (s.field_ids.size() != field_count()) {
    throw ConfigError("sample has " + std::to_string(s.field_ids.size()) + " ids, expected " +
                      std::to_string(field_count()));
  }
  for (std::size_t f = 0; f < s.field_ids.size(); ++f) {
    if (s.field_ids[f] >= vocab_sizes_[f]) {
      throw ConfigError("field '" + field_names_[f] + "': id " + std::to_string(s.field_ids[f]) +
                        " >= vocabulary size " + std::to_string(vocab_sizes_[f]));
    }
  }
  if ((s.y_a != 0 && s.y_a != 1) || (s.y_b != 0 && s.y_b != 1)) {
    throw ConfigError("labels must be 0 or 1");
  }
  samples_.push_back(std::move(s));
  if (split_tags_) split_tags_->push_back(SplitTag::Train);
}

std::vector<int> Dataset::labels(Task t) const {
  std::vector<int> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.label(t));
  return out;
}

std::size_t Dataset::positives(Task t) const {
  return static_cast<std::size_t>(std::count_if(
      samples_.begin(), samples_.end(), [t](const Sample& s) { return s.label(t) == 1; }));
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out(field_names_, vocab_sizes_);
  out.samples_.reserve(indices.size());
  for (std::size_t i : indices) out.samples_.push_back(samples_.at(i));
  if (split_tags_) {
    std::vector<SplitTag> tags;
    for (std::size_t i : indices) tags.push_back((*split_tags_)[i]);
    out.split_tags_ = std::move(tags);
  }
  return out;
}

void Dataset::set_split_tags(std::vector<SplitTag> tags) {
  if (tags.size() != samples_.size()) throw ConfigError("split tag count != sample count");
  split_tags_ = std::move(tags);
}

void Dataset::set_label(std::size_t row, Task t, int value) {
  (t == Task::A ? samples_.at(row).y_a : samples_.at(row).y_b) = value;
}

// ---- CSV ----

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::size_t parse_uint(std::string_view cell, std::size_t row, const std::string& column) {
  std::size_t v = 0;
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (cell.empty() || ec != std::errc() || ptr != end) {
    throw ParseError("row " + std::to_string(row) + ": column '" + column +
                     "': expected a nonnegative integer, got '" + std::string(cell) + "'");
  }
  return v;
}

}  // namespace

Dataset parse_csv(const std::string& text, const std::optional<CsvSchema>& schema) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_commas(line);
  std::vector<std::string> fields;
  std::vector<std::size_t> field_cols;
  std::optional<std::size_t> col_a, col_b, col_split;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name(header[c]);
    if (name.starts_with("f_") && name.size() > 2) {
      fields.push_back(name.substr(2));
      field_cols.push_back(c);
    } else if (name == "label_a" && !col_a) {
      col_a = c;
    } else if (name == "label_b" && !col_b) {
      col_b = c;
    } else if (name == "split" && !col_split) {
      col_split = c;
    } else {
      throw ParseError("header: unknown or duplicate column '" + name + "'");
    }
  }
  if (!col_a || !col_b) throw ParseError("header: missing label_a or label_b column");
  if (fields.empty()) throw ParseError("header: no feature columns (f_<name>)");
  if (schema && schema->field_names != fields) {
    throw ParseError("header: feature columns do not match the schema");
  }

  struct Row {
    std::vector<std::size_t> ids;
    int ya, yb;
    SplitTag tag;
  };
  std::vector<Row> rows;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    ++row_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != header.size()) {
      throw ParseError("row " + std::to_string(row_no) + ": expected " +
                       std::to_string(header.size()) + " columns, got " +
                       std::to_string(cells.size()));
    }
    Row r;
    for (std::size_t f = 0; f < fields.size(); ++f) {
      r.ids.push_back(parse_uint(cells[field_cols[f]], row_no, "f_" + fields[f]));
    }
    const auto label = [&](std::size_t col, const char* name) {
      const auto v = parse_uint(cells[col], row_no, name);
      if (v > 1) {
        throw ParseError("row " + std::to_string(row_no) + ": " + name + " must be 0 or 1, got " +
                         std::to_string(v));
      }
      return static_cast<int>(v);
    };
    r.ya = label(*col_a, "label_a");
    r.yb = label(*col_b, "label_b");
    r.tag = SplitTag::Train;
    if (col_split) {
      const auto v = parse_uint(cells[*col_split], row_no, "split");
      if (v > 2) throw ParseError("row " + std::to_string(row_no) + ": split must be 0, 1 or 2");
      r.tag = static_cast<SplitTag>(v);
    }
    rows.push_back(std::move(r));
  }

  std::vector<std::size_t> vocab(fields.size(), 1);
  if (schema) {
    vocab = schema->vocab_sizes;
  } else {
    for (const auto& r : rows) {
      for (std::size_t f = 0; f < fields.size(); ++f) vocab[f] = std::max(vocab[f], r.ids[f] + 1);
    }
  }
  Dataset ds(fields, vocab);
  std::vector<SplitTag> tags;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t f = 0; f < fields.size(); ++f) {
      if (rows[i].ids[f] >= vocab[f]) {
        throw ParseError("row " + std::to_string(i + 1) + ": f_" + fields[f] + " id " +
                         std::to_string(rows[i].ids[f]) + " exceeds vocabulary size " +
                         std::to_string(vocab[f]));
      }
    }
    ds.add(Sample{std::move(rows[i].ids), rows[i].ya, rows[i].yb});
    tags.push_back(rows[i].tag);
  }
  if (col_split) ds.set_split_tags(std::move(tags));
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const std::optional<CsvSchema>& schema) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open dataset file '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_csv(ss.str(), schema);
}

std::string to_csv(const Dataset& ds) {
  std::ostringstream os;
  for (const auto& name : ds.field_names()) os << "f_" << name << ',';
  os << "label_a,label_b";
  const auto& tags = ds.split_tags();
  if (tags) os << ",split";
  os << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t id : ds[i].field_ids) os << id << ',';
    os << ds[i].y_a << ',' << ds[i].y_b;
    if (tags) os << ',' << static_cast<int>((*tags)[i]);
    os << '\n';
  }
  return os.str();
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  f << to_csv(ds);
}

// ---- partition & sampling ----

LabelPartition partition(const Dataset& ds) {
  LabelPartition p;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& s = ds[i];
    if (s.y_a == 1) {
      (s.y_b == 1 ? p.pp : p.pm).push_back(i);
      p.pos_a.push_back(i);
    } else {
      (s.y_b == 1 ? p.mp : p.mm).push_back(i);
      p.neg_a.push_back(i);
    }
    (s.y_b == 1 ? p.pos_b : p.neg_b).push_back(i);
  }
  return p;
}

namespace {

std::vector<std::size_t> draw(const std::vector<std::size_t>& pool, const char* name,
                              std::size_t batch, Rng& rng) {
  if (pool.empty()) throw DegenerateLabels(name);
  std::vector<std::size_t> out(batch);
  for (auto& v : out) v = pool[rng.index(pool.size())];
  return out;
}

}  // namespace

QuadrupletBatch sample_quadruplets(const LabelPartition& p, std::size_t batch, Rng& rng) {
  // Check all subsets before consuming randomness.
  const std::pair<const std::vector<std::size_t>*, const char*> pools[] = {
      {&p.pp, "++"}, {&p.pm, "+-"}, {&p.mp, "-+"}, {&p.mm, "--"}};
  for (const auto& [pool, name] : pools) {
    if (pool->empty()) throw DegenerateLabels(name);
  }
  QuadrupletBatch q;
  q.pp = draw(p.pp, "++", batch, rng);
  q.pm = draw(p.pm, "+-", batch, rng);
  q.mp = draw(p.mp, "-+", batch, rng);
  q.mm = draw(p.mm, "--", batch, rng);
  return q;
}

PairBatch sample_pairs(const LabelPartition& p, Task task, std::size_t batch, Rng& rng) {
  const char* pos_name = task == Task::A ? "+." : ".+";
  const char* neg_name = task == Task::A ? "-." : ".-";
  if (p.positives(task).empty()) throw DegenerateLabels(pos_name);
  if (p.negatives(task).empty()) throw DegenerateLabels(neg_name);
  PairBatch b;
  b.pos = draw(p.positives(task), pos_name, batch, rng);
  b.neg = draw(p.negatives(task), neg_name, batch, rng);
  return b;
}

std::vector<std::size_t> sample_uniform(std::size_t n, std::size_t batch, Rng& rng) {
  if (n == 0) throw DegenerateLabels("all");
  std::vector<std::size_t> out(batch);
  for (auto& v : out) v = rng.index(n);
  return out;
}

// ---- synthetic generator ----

void SynthConfig::validate() const {
  if (n_users == 0 || n_items == 0 || dim == 0 || n_samples == 0) {
    throw ConfigError("synth: n_users, n_items, dim and n_samples must be >= 1");
  }
  if (n_context_fields > 0 && context_vocab == 0) {
    throw ConfigError("synth: context_vocab must be >= 1");
  }
  if (!(rho >= -1.0 && rho <= 1.0)) throw ConfigError("synth: rho must lie in [-1, 1]");
  if (!(rate_a > 0.0 && rate_a < 1.0) || !(rate_b > 0.0 && rate_b < 1.0)) {
    throw ConfigError("synth: label rates must lie in (0, 1)");
  }
  if (!(utility_scale >= 0.0) || !(main_effect_std >= 0.0) || !(noise >= 0.0)) {
    throw ConfigError("synth: scales must be nonnegative");
  }
}

namespace {

// Finds b with |mean(u_i < sigmoid(z_i + b)) - target| <= tol by bisection.
double fit_bias(std::span<const double> z, std::span<const double> uniforms, double target,
                const char* task) {
  constexpr double kTol = 0.005;
  constexpr int kMaxIter = 200;
  const auto rate = [&](double b) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < z.size(); ++i) pos += uniforms[i] < numgrad::stable_sigmoid(z[i] + b);
    return static_cast<double>(pos) / static_cast<double>(z.size());
  };
  double lo = -60.0, hi = 60.0;
  for (int it = 0; it < kMaxIter; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double r = rate(mid);
    if (std::abs(r - target) <= kTol) return mid;
    (r < target ? lo : hi) = mid;
  }
  throw ConfigError(std::string("synth: label rate for task ") + task +
                    " unreachable within tolerance after bisection");
}

}  // namespace

SyntheticData generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);

  std::vector<std::string> names{"user", "item"};
  std::vector<std::size_t> vocab{cfg.n_users, cfg.n_items};
  for (std::size_t c = 0; c < cfg.n_context_fields; ++c) {
    names.push_back("ctx" + std::to_string(c));
    vocab.push_back(cfg.context_vocab);
  }
  const std::size_t n_fields = names.size();

  // Two independent latent models: one drives task A, the other is the
  // component of task B not shared with A.
  struct Latent {
    std::vector<double> user, item;            // vocab x dim
    std::vector<std::vector<double>> effects;  // per field, per id
  };
  const auto make_latent = [&] {
    Latent l;
    l.user.resize(cfg.n_users * cfg.dim);
    l.item.resize(cfg.n_items * cfg.dim);
    for (auto& v : l.user) v = rng.normal();
    for (auto& v : l.item) v = rng.normal();
    l.effects.resize(n_fields);
    for (std::size_t f = 0; f < n_fields; ++f) {
      l.effects[f].resize(vocab[f]);
      for (auto& v : l.effects[f]) v = cfg.main_effect_std * rng.normal();
    }
    return l;
  };
  const Latent lat_a = make_latent();
  const Latent lat_v = make_latent();

  const double norm =
      std::sqrt(1.0 + static_cast<double>(n_fields) * cfg.main_effect_std * cfg.main_effect_std);
  const auto score = [&](const Latent& l, const std::vector<std::size_t>& ids) {
    double dot = 0.0;
    for (std::size_t k = 0; k < cfg.dim; ++k) {
      dot += l.user[ids[0] * cfg.dim + k] * l.item[ids[1] * cfg.dim + k];
    }
    double s = dot / std::sqrt(static_cast<double>(cfg.dim));
    for (std::size_t f = 0; f < n_fields; ++f) s += l.effects[f][ids[f]];
    return s / norm;
  };

  const double shared = cfg.rho;
  const double own = std::sqrt(std::max(0.0, 1.0 - cfg.rho * cfg.rho));
  std::vector<std::vector<std::size_t>> ids(cfg.n_samples);
  std::vector<double> za(cfg.n_samples), zb(cfg.n_samples);
  std::vector<double> ua_draw(cfg.n_samples), ub_draw(cfg.n_samples);
  for (std::size_t i = 0; i < cfg.n_samples; ++i) {
    auto& row = ids[i];
    row.resize(n_fields);
    for (std::size_t f = 0; f < n_fields; ++f) row[f] = rng.index(vocab[f]);
    const double a = score(lat_a, row);
    const double v = score(lat_v, row);
    za[i] = cfg.utility_scale * a + cfg.noise * rng.normal();
    zb[i] = cfg.utility_scale * (shared * a + own * v) + cfg.noise * rng.normal();
    ua_draw[i] = rng.uniform();
    ub_draw[i] = rng.uniform();
  }

  SyntheticData out;
  out.bias_a = fit_bias(za, ua_draw, cfg.rate_a, "a");
  out.bias_b = fit_bias(zb, ub_draw, cfg.rate_b, "b");
  out.dataset = Dataset(names, vocab);
  out.u_a.resize(cfg.n_samples);
  out.u_b.resize(cfg.n_samples);
  for (std::size_t i = 0; i < cfg.n_samples; ++i) {
    out.u_a[i] = za[i] + out.bias_a;
    out.u_b[i] = zb[i] + out.bias_b;
    const int ya = ua_draw[i] < numgrad::stable_sigmoid(out.u_a[i]) ? 1 : 0;
    const int yb = ub_draw[i] < numgrad::stable_sigmoid(out.u_b[i]) ? 1 : 0;
    out.dataset.add(Sample{std::move(ids[i]), ya, yb});
  }
  return out;
}

void write_utilities(const SyntheticData& data, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  f << "index,u_a,u_b\n" << std::setprecision(17);
  for (std::size_t i = 0; i < data.u_a.size(); ++i) {
    f << i << ',' << data.u_a[i] << ',' << data.u_b[i] << '\n';
  }
}

// ---- corruption ----

namespace {

// k distinct elements chosen uniformly (partial Fisher-Yates).
std::vector<std::size_t> choose(std::vector<std::size_t> pool, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace

Dataset corrupt_labels(const Dataset& ds, Task task, double ratio, Rng& rng) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("corrupt_labels: ratio must lie in [0, 1]");
  std::vector<std::size_t> pos, negs;
  for (std::size_t i = 0; i < ds.size(); ++i) (ds[i].label(task) == 1 ? pos : negs).push_back(i);
  if (pos.empty() || negs.empty()) {
    throw ConfigError(std::string("corrupt_labels: task ") + task_name(task) +
                      " needs at least one positive and one negative");
  }
  // Small epsilon so e.g. 0.29 * 100 floors to 29 rather than 28.
  const auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(pos.size()) + 1e-9));
  if (k > negs.size()) {
    throw ConfigError("corrupt_labels: " + std::to_string(k) + " positives to swap but only " +
                      std::to_string(negs.size()) + " negatives");
  }
  Dataset out = ds;
  for (std::size_t i : choose(std::move(pos), k, rng)) out.set_label(i, task, 0);
  for (std::size_t i : choose(std::move(negs), k, rng)) out.set_label(i, task, 1);
  return out;
}

// ---- splits ----

DataSplit random_split(const Dataset& ds, const SplitFractions& fr, std::uint64_t seed) {
  if (fr.train < 0 || fr.valid < 0 || fr.test < 0 ||
      std::abs(fr.train + fr.valid + fr.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be nonnegative and sum to 1");
  }
  std::vector<std::size_t> perm(ds.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng(seed);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
  const auto n = static_cast<double>(ds.size());
  const auto n_train = static_cast<std::size_t>(std::floor(fr.train * n + 1e-9));
  const auto n_valid =
      std::min(ds.size() - n_train, static_cast<std::size_t>(std::floor(fr.valid * n + 1e-9)));
  std::span<const std::size_t> all(perm);
  DataSplit out;
  out.train = ds.subset(all.subspan(0, n_train));
  out.valid = ds.subset(all.subspan(n_train, n_valid));
  out.test = ds.subset(all.subspan(n_train + n_valid));
  return out;
}

DataSplit column_split(const Dataset& ds) {
  if (!ds.split_tags()) throw ConfigError("dataset has no split column");
  std::vector<std::size_t> parts[3];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    parts[static_cast<int>((*ds.split_tags())[i])].push_back(i);
  }
  return DataSplit{ds.subset(parts[0]), ds.subset(parts[1]), ds.subset(parts[2])};
}

}  // namespace crossdistil
