#include "amplasso/tolerances.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace amplasso {

using nlohmann::json;

namespace {

template <class T>
void read_if(const json& j, const char* key, T& out)
{
    if (j.contains(key))
        out = j.at(key).get<T>();
}

}  // namespace

Tolerances tolerances_from_json_text(const std::string& text)
{
    Tolerances tol;
    const json j = json::parse(text);
    if (j.contains("quadrature")) {
        const json& q = j["quadrature"];
        read_if(q, "abs_tol", tol.quadrature.abs_tol);
        read_if(q, "max_intervals", tol.quadrature.max_intervals);
        read_if(q, "truncation_sd", tol.quadrature.truncation_sd);
    }
    if (j.contains("se")) {
        const json& s = j["se"];
        read_if(s, "alpha_offset", tol.se.alpha_offset);
        read_if(s, "alpha_upper", tol.se.alpha_upper);
        read_if(s, "alpha_grid_points", tol.se.alpha_grid_points);
        read_if(s, "alpha_min_tol", tol.se.alpha_min_tol);
        read_if(s, "fixed_point_rel_tol", tol.se.fixed_point_rel_tol);
        read_if(s, "fixed_point_max_iter", tol.se.fixed_point_max_iter);
        read_if(s, "lambda_tol", tol.se.lambda_tol);
        read_if(s, "residual_tol", tol.se.residual_tol);
        read_if(s, "bisection_max_iter", tol.se.bisection_max_iter);
        read_if(s, "opt_lambda_lo", tol.se.opt_lambda_lo);
        read_if(s, "opt_lambda_hi", tol.se.opt_lambda_hi);
        read_if(s, "opt_lambda_tol", tol.se.opt_lambda_tol);
        read_if(s, "stationarity_tol", tol.se.stationarity_tol);
    }
    if (j.contains("level_set")) {
        const json& l = j["level_set"];
        read_if(l, "zero_band_factor", tol.level_set.zero_band_factor);
        read_if(l, "grid_step_factor", tol.level_set.grid_step_factor);
        read_if(l, "endpoint_tol", tol.level_set.endpoint_tol);
        read_if(l, "calibrate_tol", tol.level_set.calibrate_tol);
    }
    if (j.contains("lasso")) {
        const json& l = j["lasso"];
        read_if(l, "change_tol", tol.lasso.change_tol);
        read_if(l, "gap_tol", tol.lasso.gap_tol);
        read_if(l, "max_sweeps", tol.lasso.max_sweeps);
        read_if(l, "zero_snap", tol.lasso.zero_snap);
    }
    return tol;
}

Tolerances load_tolerances(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open tolerance config: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return tolerances_from_json_text(buf.str());
}

std::string tolerances_to_json_text(const Tolerances& tol)
{
    json j;
    j["quadrature"] = {{"abs_tol", tol.quadrature.abs_tol},
                       {"max_intervals", tol.quadrature.max_intervals},
                       {"truncation_sd", tol.quadrature.truncation_sd}};
    j["se"] = {{"alpha_offset", tol.se.alpha_offset},
               {"alpha_upper", tol.se.alpha_upper},
               {"alpha_grid_points", tol.se.alpha_grid_points},
               {"alpha_min_tol", tol.se.alpha_min_tol},
               {"fixed_point_rel_tol", tol.se.fixed_point_rel_tol},
               {"fixed_point_max_iter", tol.se.fixed_point_max_iter},
               {"lambda_tol", tol.se.lambda_tol},
               {"residual_tol", tol.se.residual_tol},
               {"bisection_max_iter", tol.se.bisection_max_iter},
               {"opt_lambda_lo", tol.se.opt_lambda_lo},
               {"opt_lambda_hi", tol.se.opt_lambda_hi},
               {"opt_lambda_tol", tol.se.opt_lambda_tol},
               {"stationarity_tol", tol.se.stationarity_tol}};
    j["level_set"] = {{"zero_band_factor", tol.level_set.zero_band_factor},
                      {"grid_step_factor", tol.level_set.grid_step_factor},
                      {"endpoint_tol", tol.level_set.endpoint_tol},
                      {"calibrate_tol", tol.level_set.calibrate_tol}};
    j["lasso"] = {{"change_tol", tol.lasso.change_tol},
                  {"gap_tol", tol.lasso.gap_tol},
                  {"max_sweeps", tol.lasso.max_sweeps},
                  {"zero_snap", tol.lasso.zero_snap}};
    return j.dump(2);
}

}  // namespace amplasso
