#pragma once

#include "htclip/clipping.hpp"
#include "htclip/hardness.hpp"
#include "htclip/noise.hpp"
#include "htclip/schedules.hpp"

#include <nlohmann/json.hpp>

#include <optional>

namespace htclip {

/// Finite values as numbers, infinities as the strings "inf" / "-inf", NaN as "nan".
nlohmann::json json_number(double v);
nlohmann::json json_number(const std::optional<double>& v);  // null when empty

nlohmann::json json_vector(const Vector& v);

nlohmann::json to_json(const NoiseSpec& noise);
nlohmann::json to_json(const ScheduleConstants& constants);
nlohmann::json to_json(const ClipErrorReport& report);
nlohmann::json to_json(const HardParams& params);
nlohmann::json to_json(const HardInstance& instance);
nlohmann::json to_json(const Codebook& codebook);
nlohmann::json to_json(const StableDeffBound& bound);
nlohmann::json to_json(const MomentEstimate& estimate);

}  // namespace htclip
