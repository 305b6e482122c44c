#pragma once

#include "ctmle/estimators.hpp"
#include "ctmle/monte_carlo.hpp"

#include "json.hpp"

#include <string>
#include <vector>

namespace ctmle {

using Json = nlohmann::json;

/// Field layout is documented in docs/json_schema.md. Non-finite numbers become null.
Json to_json(const EstimateReport& r);
EstimateReport estimate_report_from_json(const Json& j);

Json to_json(const MultiArmReport& r);
Json to_json(const SimulationReport& r);

/// Flat CSV, one row per estimator and metric: estimator,metric,value.
std::string simulation_csv(const SimulationReport& r);

/// Two-column curve: x,density.
std::string kde_csv(const KdeCurve& c);

/// Human-readable tables.
std::string estimate_table(const std::vector<EstimateReport>& reports);
std::string multiarm_table(const MultiArmReport& r);
std::string simulation_table(const SimulationReport& r);

}  // namespace ctmle
