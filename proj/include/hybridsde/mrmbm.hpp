#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "hybridsde/grid.hpp"

namespace hsde {

/// Level-dependent (Q, R, S) description of the regenerative queue (L, Y)
/// over the state space E + {reset}, where the reset state (index p) carries
/// Y back to the restart level at unit speed.
///
/// Band b = 0..2M-1 stands for band m = b - M + 1, spanning (zeta_{m-1}, zeta_m).
/// Point k = 0..2M stands for grid point m = k - M.
struct QrsSpec {
    SpaceGrid grid;
    std::size_t states = 0;           // p; matrices are (p+1) x (p+1)
    double kill_rate = 0.0;           // q
    std::size_t restart_state = 0;    // i0
    std::vector<Eigen::MatrixXd> q_band{};
    std::vector<Eigen::VectorXd> r_band{};   // diagonal of R
    std::vector<Eigen::VectorXd> s_band{};   // diagonal of S
    std::vector<Eigen::MatrixXd> q_point{};
    std::vector<Eigen::VectorXd> r_point{};

    std::size_t reset_index() const noexcept { return states; }
    const Eigen::MatrixXd& band_Q(int m) const { return q_band.at(static_cast<std::size_t>(m + grid.M() - 1)); }
    const Eigen::VectorXd& band_R(int m) const { return r_band.at(static_cast<std::size_t>(m + grid.M() - 1)); }
    const Eigen::VectorXd& band_S(int m) const { return s_band.at(static_cast<std::size_t>(m + grid.M() - 1)); }
    const Eigen::MatrixXd& point_Q(int m) const { return q_point.at(static_cast<std::size_t>(m + grid.M())); }
    const Eigen::VectorXd& point_R(int m) const { return r_point.at(static_cast<std::size_t>(m + grid.M())); }
};

/// Builds the block matrices from a grid approximation. Band blocks use the
/// approximation's band values; interior point blocks use the values at
/// zeta_m under right-continuity. Throws ModelError when the grid's zeta_0
/// differs from `restart_level` (default: the approximation's start level).
QrsSpec assemble_qrs(const GridApproximation& approx, double q, std::size_t restart_state,
                     std::optional<double> restart_level = std::nullopt);

enum class NodeKind { regular, reset, atom_low, atom_high, atom_restart };

std::string_view to_string(NodeKind kind) noexcept;

struct ChainNode {
    NodeKind kind = NodeKind::regular;
    std::size_t cell = 0;    // meaningful for regular and reset nodes
    std::size_t state = 0;   // p for reset-type nodes
    double level = 0.0;      // cell centre or atom level
};

struct SchemeSwitch {
    std::size_t state = 0;
    std::size_t band = 0;    // 0-based band index
};

/// Finite CTMC approximating (L, Y): K cells per band for every regular and
/// reset state, plus atoms (0, j) and (a, j) for regular j and (u, reset).
struct DiscretizedChain {
    std::size_t states = 0;
    std::size_t cells = 0;
    std::size_t cells_per_band = 0;
    std::size_t restart_state = 0;
    double band_high = 0.0;
    std::vector<double> cell_edges;    // cells + 1 entries, 0 .. a
    std::vector<double> cell_centers;
    std::vector<ChainNode> nodes;
    Eigen::SparseMatrix<double, Eigen::RowMajor> generator;
    std::vector<SchemeSwitch> upwind;  // (state, band) pairs where the upwind scheme was used

    std::size_t size() const noexcept { return nodes.size(); }
    std::size_t regular(std::size_t cell, std::size_t state) const noexcept { return cell * (states + 1) + state; }
    std::size_t reset(std::size_t cell) const noexcept { return cell * (states + 1) + states; }
    std::size_t atom_low(std::size_t state) const noexcept { return cells * (states + 1) + state; }
    std::size_t atom_high(std::size_t state) const noexcept { return cells * (states + 1) + states + state; }
    std::size_t atom_restart() const noexcept { return cells * (states + 1) + 2 * states; }
};

/// Neighbour rates of a drift-diffusion cell: central differences when both
/// rates are nonnegative, upwinded drift otherwise. `h_down` / `h_up` are the
/// distances to the lower / upper neighbour.
struct CellRates {
    double up = 0.0;
    double down = 0.0;
    bool upwind = false;
};
CellRates cell_rates(double mu, double sigma, double h_down, double h_up) noexcept;

/// Throws ModelError for K < 1 or when some node cannot return to the
/// restart atom (e.g. a state with zero drift, zero noise and no exits).
DiscretizedChain discretize(const QrsSpec& qrs, int cells_per_band = 10);

struct StationarySolve {
    Eigen::VectorXd pi;
    double residual = 0.0;        // || pi G ||_inf
    double normalization_error = 0.0;
    int refinement_steps = 0;
};

/// Stationary vector of a generator with a single closed class: sparse LU of
/// G^T with one balance equation replaced by sum(pi) = 1, followed by
/// extended-precision iterative refinement. Throws NumericalError when the
/// system is singular or the residual stays above `tol`.
StationarySolve stationary_distribution(const Eigen::SparseMatrix<double, Eigen::RowMajor>& generator,
                                        double tol = 1e-10);

/// Steady-state quantities of the discretized queue.
struct StationaryResult {
    Eigen::VectorXd pi;
    double residual = 0.0;
    double normalization_error = 0.0;
    int refinement_steps = 0;
    std::vector<double> p_minus;              // pi at atoms (0, j)
    std::vector<double> p_plus;               // pi at atoms (a, j)
    double p0 = 0.0;                          // pi at (u, reset)
    std::vector<std::vector<double>> F;       // [state][edge] cumulative regular mass
};

StationaryResult stationary(const DiscretizedChain& chain, double tol = 1e-10);

/// Exit law and occupation profile of one excursion started at (i0, u).
struct PassageResult {
    std::size_t restart_state = 0;
    std::vector<double> m_minus;
    std::vector<double> m_plus;
    std::vector<double> edges;                         // cell edges
    std::vector<std::vector<double>> occupation_table;  // [state][edge] F_j / p0

    std::size_t states() const noexcept { return m_minus.size(); }
    /// Expected time in state j with 0 < Y <= b before the excursion ends,
    /// linearly interpolated between cell edges.
    double occupation(std::size_t j, double b) const;
    double exit_probability() const noexcept;
};

/// Ratio formulas: m-(j) = p_minus(j) / p0, m+(j) = p_plus(j) / p0,
/// O_j(b) = F_j(b) / p0. Throws NumericalError when p0 = 0.
PassageResult extract_passage(const StationaryResult& st, const DiscretizedChain& chain);

struct SolveOptions {
    int cells_per_band = 10;
    double tol = 1e-10;
};

/// Everything produced by one end-to-end solve, for logging.
struct PassageSolution {
    PassageResult passage;
    double residual = 0.0;
    double normalization_error = 0.0;
    int refinement_steps = 0;
    std::size_t chain_size = 0;
    std::vector<SchemeSwitch> upwind;
};

/// assemble_qrs -> discretize -> stationary -> extract_passage, with the
/// approximation's own kill rate and start state.
PassageSolution solve_passage(const GridApproximation& approx, const SolveOptions& options = {});

/// CSV j,m_minus,m_plus.
std::string passage_csv(const PassageResult& result);
/// CSV b,j,O for every (b, j).
std::string occupation_csv(const PassageResult& result, const std::vector<double>& levels);
/// CSV index,kind,cell,state,level (state "reset" for reset-type nodes).
std::string chain_nodes_csv(const DiscretizedChain& chain);
/// CSV row,col,rate of the off-diagonal and diagonal generator entries.
std::string chain_triplets_csv(const DiscretizedChain& chain);

}  // namespace hsde
