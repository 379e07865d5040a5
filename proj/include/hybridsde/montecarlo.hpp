#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hybridsde/dynamics.hpp"
#include "hybridsde/grid.hpp"
#include "hybridsde/model.hpp"

namespace hsde {

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    std::uint64_t config_hash = 0;
};

/// 64-bit FNV-1a, used to tag estimates with the configuration that produced them.
std::uint64_t config_hash(std::string_view text) noexcept;

struct McOptions {
    std::size_t n_paths = 10000;
    double dt = 1e-3;
    std::uint64_t seed = 1;
    std::optional<double> horizon;
    std::optional<double> kill_rate;
    bool bridge_correction = false;
    unsigned workers = 1;
    std::vector<double> occupation_levels;
    std::uint64_t config_hash = 0;
};

/// Exit law, censoring and occupation estimates from one batch of paths.
/// Path k always uses substream k of the seed, and sums are reduced in path
/// order, so results do not depend on the worker count.
struct PassageEstimates {
    std::vector<McEstimate> m_minus;                 // [state]
    std::vector<McEstimate> m_plus;                  // [state]
    McEstimate killed;
    McEstimate censored;                             // horizon reached
    std::vector<double> occupation_levels;
    std::vector<std::vector<McEstimate>> occupation;  // [level][state]
    McEstimate mean_stop_time;                       // E[exit, kill or horizon time]
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
};

/// Simulates `n_paths` paths of the given dynamics. Throws ModelError for
/// n_paths = 0 or workers = 0.
PassageEstimates mc_passage(const Dynamics& dyn, const McOptions& options);

/// Occupation estimates for a single level b, one per state.
std::vector<McEstimate> mc_occupation(const Dynamics& dyn, double b, const McOptions& options);

/// CSV quantity,state,value,std_error,n_paths,seed. Occupation rows are
/// labelled O(b); killed and censored rows leave the state column empty.
std::string estimates_csv(const PassageEstimates& est);

/// Two-sided Kolmogorov-Smirnov test of a sample against Exp(rate).
struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};
KsResult ks_test_exponential(std::vector<double> sample, double rate);

/// Asymptotic Kolmogorov tail probability P(K > lambda).
double kolmogorov_tail(double lambda) noexcept;

/// Frozen variant of a model: mu = sigma = 0, Lambda constant at
/// Lambda(x_frozen), started at (i, x_frozen). The uniformization rate is
/// `gamma` when given, otherwise the source model's.
HybridModel frozen_model(const HybridModel& model, std::size_t i, double x_frozen,
                         std::optional<double> gamma = std::nullopt);

struct SojournTest {
    double rate = 0.0;              // |Lambda_ii(x_frozen)|
    double uniformization_rate = 0.0;
    std::size_t n = 0;              // sojourns requested
    std::size_t jumps_observed = 0;  // sojourns that ended within the horizon
    KsResult ks;                    // empty (n = 0) when rate = 0
};

/// Sojourn lengths in state i of the uniformized jump process with X frozen
/// at x_frozen, tested against Exp(|Lambda_ii(x_frozen)|). When Lambda_ii = 0
/// every path runs to a fixed horizon and `jumps_observed` counts real jumps.
SojournTest sojourn_law_test(const HybridModel& model, std::size_t i, double x_frozen, std::size_t n_sojourns,
                             std::uint64_t seed, std::optional<double> gamma = std::nullopt);

struct KernelEntry {
    std::size_t to = 0;
    double expected = 0.0;   // delta_ik + Lambda_ik / gamma
    double observed = 0.0;
    double std_error = 0.0;  // binomial, from the expected probability
    bool pass = false;       // |observed - expected| <= 3 SE (exact when SE = 0)
};

/// Empirical law of the state after the first uniformization epoch, with X
/// frozen at x_frozen, compared entrywise with the row of I + Lambda / gamma.
std::vector<KernelEntry> jump_kernel_test(const HybridModel& model, std::size_t i, double x_frozen,
                                          std::size_t n, std::uint64_t seed,
                                          std::optional<double> gamma = std::nullopt);

struct DecouplingRow {
    std::string label;
    McEstimate frequency;   // P(H_hat != 0 by the horizon)
    double sup_distance_q50 = 0.0;
    double sup_distance_q90 = 0.0;
};

struct DecouplingOptions {
    double horizon = 2.0;
    std::size_t n_paths = 10000;
    double dt = 1e-3;
    std::uint64_t seed = 1;
    unsigned workers = 1;
};

/// Paired-seed coupling study: path k uses the same substream for every
/// approximation. All approximations must share the model's uniformization rate.
std::vector<DecouplingRow> mc_decoupling(const HybridModel& model, const std::vector<GridApproximation>& approxs,
                                         const std::vector<std::string>& labels, const DecouplingOptions& options);

/// Linear-interpolation sample quantile (type 7); the input need not be sorted.
double sample_quantile(std::vector<double> values, double prob);

}  // namespace hsde
