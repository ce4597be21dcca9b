#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "supermart/criteria.hpp"
#include "supermart/functionals.hpp"
#include "supermart/rates.hpp"
#include "supermart/sim.hpp"

namespace supermart {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

/// Throws SchemaError with a JSON pointer to the offending node.
Model model_from_json(const json& j);
GWModel gw_from_json(const json& j);
bool is_gw_json(const json& j);

json model_to_json(const Model& model);
json gw_to_json(const GWModel& gw);

/// +inf as the string "inf", NaN as null.
json extended(double v);
/// Inverse of `extended`.
double extended_from_json(const json& j);

json eigen_to_json(const Model& model, const Eigentriple& eig);
json validation_to_json(const ValidationReport& report);
json criteria_to_json(const CriteriaReport& report);
json gw_criteria_to_json(const GWCriteria& c);
json fit_to_json(const RateFit& fit);
json exceedance_to_json(const ExceedanceReport& r);
json window_law_to_json(const WindowLawReport& r);

/// Round-trippable decimal with 17 significant digits.
std::string format_double(double v);

std::uint64_t fnv1a64(const std::string& data);
/// "# supermart <version> config_hash=<hex> seed=<seed>"
std::string meta_line(std::uint64_t config_hash, std::uint64_t seed);

/// Header `path_id,t,mass_1..mass_d,M`, preceded by an optional metadata line.
void write_paths_csv(std::ostream& os, const std::vector<PathRecord>& paths,
                     const std::string& meta = "");
/// Header `path_id,t,type,size` (types 1-based).
void write_jumps_csv(std::ostream& os, const std::vector<PathRecord>& paths,
                     const std::string& meta = "");
void write_gw_csv(std::ostream& os, const GWEnsemble& gw, const std::string& meta = "");
/// Header `path_id,kind,t,value`.
void write_functionals_csv(std::ostream& os, std::int64_t path_id,
                           const std::vector<FunctionalCurve>& curves);

std::vector<PathRecord> read_paths_csv(std::istream& is);
/// Attaches jumps to the matching paths.
void read_jumps_csv(std::istream& is, std::vector<PathRecord>& paths);

json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace supermart
