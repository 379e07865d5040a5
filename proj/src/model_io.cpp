#include "hybridsde/model_io.hpp"

#include <fstream>
#include <sstream>

#include "hybridsde/errors.hpp"

namespace hsde {

using nlohmann::json;

namespace {

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
    throw ParseError(field + ": " + what);
}

const json& require(const json& j, const std::string& key, const std::string& field) {
    if (!j.contains(key)) field_error(field + "." + key, "missing required field");
    return j.at(key);
}

double as_number(const json& j, const std::string& field) {
    if (!j.is_number()) field_error(field, "expected a number");
    return j.get<double>();
}

PolyExpr as_poly(const json& j, const std::string& field) {
    if (j.is_number()) return PolyExpr::constant(j.get<double>());
    if (!j.is_array() || j.empty()) field_error(field, "expected a nonempty coefficient array");
    std::vector<double> c;
    c.reserve(j.size());
    for (std::size_t k = 0; k < j.size(); ++k) {
        c.push_back(as_number(j[k], field + "[" + std::to_string(k) + "]"));
    }
    try {
        return PolyExpr(std::move(c));
    } catch (const ModelError& e) {
        field_error(field, e.what());
    }
}

std::vector<PolyExpr> as_poly_list(const json& j, std::size_t p, const std::string& field) {
    if (!j.is_array()) field_error(field, "expected an array of polynomials");
    if (j.size() != p) {
        field_error(field, "expected " + std::to_string(p) + " entries, got " + std::to_string(j.size()));
    }
    std::vector<PolyExpr> out;
    for (std::size_t i = 0; i < p; ++i) out.push_back(as_poly(j[i], field + "[" + std::to_string(i) + "]"));
    return out;
}

std::vector<double> coeff_vector(const PolyExpr& p) { return {p.coeffs().begin(), p.coeffs().end()}; }

}  // namespace

json parse_json_text(std::string_view text, std::string_view source) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        std::size_t col = 1;
        const std::size_t stop = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        for (std::size_t k = 0; k < stop; ++k) {
            if (text[k] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::ostringstream msg;
        msg << source << ":" << line << ":" << col << ": JSON syntax error";
        throw ParseError(msg.str());
    }
}

json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string() + ": cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_json_text(buf.str(), path.string());
}

HybridModel model_from_json(const json& j, std::string_view field_sv) {
    const std::string field(field_sv);
    if (!j.is_object()) field_error(field, "expected an object");

    const json& states = require(j, "states", field);
    if (!states.is_number_integer() || states.get<long long>() < 1) {
        field_error(field + ".states", "expected a positive integer");
    }
    const auto p = static_cast<std::size_t>(states.get<long long>());

    ModelParams params;
    params.mu = as_poly_list(require(j, "mu", field), p, field + ".mu");
    params.sigma = as_poly_list(require(j, "sigma", field), p, field + ".sigma");

    const json& lam = require(j, "lambda", field);
    if (!lam.is_array() || lam.size() != p) field_error(field + ".lambda", "expected a p x p array");
    for (std::size_t i = 0; i < p; ++i) {
        params.lambda.push_back(
            as_poly_list(lam[i], p, field + ".lambda[" + std::to_string(i) + "]"));
    }

    params.band_high = as_number(require(j, "a", field), field + ".a");
    params.start_level = as_number(require(j, "u", field), field + ".u");
    const json& i0 = require(j, "i0", field);
    if (!i0.is_number_integer()) field_error(field + ".i0", "expected an integer (1-based state)");
    const long long i0v = i0.get<long long>();
    if (i0v < 1 || static_cast<std::size_t>(i0v) > p) {
        throw ModelError(field + ".i0: start state must lie in 1.." + std::to_string(p));
    }
    params.start_state = static_cast<std::size_t>(i0v - 1);
    if (j.contains("q")) params.kill_rate = as_number(j.at("q"), field + ".q");
    if (j.contains("gamma") && !j.at("gamma").is_null()) {
        params.uniformization_rate = as_number(j.at("gamma"), field + ".gamma");
    }
    if (j.contains("lipschitz_K") && !j.at("lipschitz_K").is_null()) {
        params.lipschitz_K = as_number(j.at("lipschitz_K"), field + ".lipschitz_K");
    }
    try {
        return HybridModel(std::move(params));
    } catch (const ModelError& e) {
        throw ModelError(field + ": " + e.what());
    }
}

HybridModel load_model(const std::filesystem::path& path) {
    return model_from_json(load_json_file(path), path.string());
}

json model_to_json(const HybridModel& model) {
    const std::size_t p = model.states();
    json j;
    j["states"] = p;
    json mu = json::array();
    json sigma = json::array();
    json lam = json::array();
    for (std::size_t i = 0; i < p; ++i) {
        mu.push_back(coeff_vector(model.mu(i)));
        sigma.push_back(coeff_vector(model.sigma(i)));
        json row = json::array();
        for (std::size_t k = 0; k < p; ++k) row.push_back(coeff_vector(model.lambda(i, k)));
        lam.push_back(row);
    }
    j["mu"] = mu;
    j["sigma"] = sigma;
    j["lambda"] = lam;
    j["a"] = model.band_high();
    j["u"] = model.start_level();
    j["i0"] = model.start_state() + 1;
    j["q"] = model.kill_rate();
    if (model.uniformization_rate_user_supplied()) j["gamma"] = model.uniformization_rate();
    if (model.lipschitz_K()) j["lipschitz_K"] = *model.lipschitz_K();
    return j;
}

}  // namespace hsde
