#pragma once

// JSON conversions for every configuration and record type. Readers start
// from the defaults, override only the keys present and reject unknown keys.

#include <json.hpp>

#include "crossdistil/data.hpp"
#include "crossdistil/losses.hpp"
#include "crossdistil/model.hpp"
#include "crossdistil/training.hpp"

namespace crossdistil {

using Json = nlohmann::ordered_json;

void to_json(Json& j, const SynthConfig& c);
void from_json(const Json& j, SynthConfig& c);
void to_json(Json& j, const ModelConfig& c);
void from_json(const Json& j, ModelConfig& c);
void to_json(Json& j, const HyperParams& c);
void from_json(const Json& j, HyperParams& c);
void to_json(Json& j, const TrainConfig& c);
void from_json(const Json& j, TrainConfig& c);
void to_json(Json& j, const SplitFractions& c);
void from_json(const Json& j, SplitFractions& c);

void to_json(Json& j, const StepMetrics& m);
void from_json(const Json& j, StepMetrics& m);
void to_json(Json& j, const EvalRecord& r);
void from_json(const Json& j, EvalRecord& r);

}  // namespace crossdistil
