#include "hybridsde/mrmbm.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "hybridsde/csv.hpp"
#include "hybridsde/errors.hpp"

namespace hsde {

using Eigen::Index;

namespace {

Index idx(std::size_t k) { return static_cast<Index>(k); }

// [[L - qI, q 1], [0, 0]] for a regular-state generator block L.
Eigen::MatrixXd killed_block(const Eigen::MatrixXd& lambda, double q) {
    const Index p = lambda.rows();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p + 1, p + 1);
    out.topLeftCorner(p, p) = lambda;
    out.topLeftCorner(p, p).diagonal().array() -= q;
    out.topRightCorner(p, 1).setConstant(q);
    return out;
}

}  // namespace

QrsSpec assemble_qrs(const GridApproximation& approx, double q, std::size_t restart_state,
                     std::optional<double> restart_level) {
    const SpaceGrid& grid = approx.grid;
    const double u = restart_level.value_or(approx.start_level());
    if (grid.level(0) != u) {
        std::ostringstream msg;
        msg << "grid point zeta_0 = " << grid.level(0) << " does not equal the restart level u = " << u;
        throw ModelError(msg.str());
    }
    if (!(q >= 0.0) || !std::isfinite(q)) throw ModelError("killing rate q must be nonnegative");
    const std::size_t p = approx.states();
    if (restart_state >= p) throw ModelError("restart state out of range");
    const int M = grid.M();
    const Index n = idx(p) + 1;
    const Index reset = idx(p);

    QrsSpec qrs{grid};
    qrs.states = p;
    qrs.kill_rate = q;
    qrs.restart_state = restart_state;

    for (std::size_t b = 0; b < grid.bands(); ++b) {
        const int m = static_cast<int>(b) - M + 1;
        qrs.q_band.push_back(killed_block(approx.lambda_hat[b], q));
        Eigen::VectorXd r(n);
        Eigen::VectorXd s(n);
        for (std::size_t i = 0; i < p; ++i) {
            r(idx(i)) = approx.mu_hat[i][b];
            s(idx(i)) = approx.sigma_hat[i][b];
        }
        r(reset) = m <= 0 ? 1.0 : -1.0;
        s(reset) = 0.0;
        qrs.r_band.push_back(std::move(r));
        qrs.s_band.push_back(std::move(s));
    }

    for (int m = -M; m <= M; ++m) {
        Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
        if (m == -M || m == M) {
            Eigen::MatrixXd qm = Eigen::MatrixXd::Zero(n, n);
            qm.topLeftCorner(n - 1, n - 1).diagonal().setConstant(-1.0);
            qm.topRightCorner(n - 1, 1).setOnes();
            qrs.q_point.push_back(std::move(qm));
            r(reset) = m == -M ? 1.0 : -1.0;
            qrs.r_point.push_back(std::move(r));
            continue;
        }
        // Value at zeta_m under right-continuity lives in band m + 1.
        const auto b = static_cast<std::size_t>(m + M);
        Eigen::MatrixXd qm = killed_block(approx.lambda_hat[b], q);
        for (std::size_t i = 0; i < p; ++i) r(idx(i)) = approx.mu_hat[i][b];
        if (m == 0) {
            qm(reset, idx(restart_state)) = 1.0;
            qm(reset, reset) = -1.0;
            r(reset) = 0.0;
        } else {
            r(reset) = m < 0 ? 1.0 : -1.0;
        }
        qrs.q_point.push_back(std::move(qm));
        qrs.r_point.push_back(std::move(r));
    }
    return qrs;
}

std::string_view to_string(NodeKind kind) noexcept {
    switch (kind) {
        case NodeKind::regular: return "regular";
        case NodeKind::reset: return "reset";
        case NodeKind::atom_low: return "atom_0";
        case NodeKind::atom_high: return "atom_a";
        case NodeKind::atom_restart: return "atom_u";
    }
    return "regular";
}

CellRates cell_rates(double mu, double sigma, double h_down, double h_up) noexcept {
    const double span = h_down + h_up;
    const double var = sigma * sigma;
    CellRates r;
    r.up = var / (h_up * span) + mu / span;
    r.down = var / (h_down * span) - mu / span;
    if (r.up < 0.0 || r.down < 0.0) {
        r.up = var / (h_up * span) + std::max(mu, 0.0) / h_up;
        r.down = var / (h_down * span) + std::max(-mu, 0.0) / h_down;
        r.upwind = true;
    }
    return r;
}

DiscretizedChain discretize(const QrsSpec& qrs, int cells_per_band) {
    if (cells_per_band < 1) throw ModelError("cells per band must be >= 1");
    const SpaceGrid& grid = qrs.grid;
    const std::size_t p = qrs.states;
    const auto K = static_cast<std::size_t>(cells_per_band);
    const std::size_t nb = grid.bands();

    DiscretizedChain chain;
    chain.states = p;
    chain.cells = nb * K;
    chain.cells_per_band = K;
    chain.restart_state = qrs.restart_state;
    chain.band_high = grid.band_high();

    chain.cell_edges.reserve(chain.cells + 1);
    for (std::size_t b = 0; b < nb; ++b) {
        const double lo = grid.band_left(b);
        const double w = grid.band_width(b);
        if (!(w > 0.0)) throw ModelError("nonpositive band width");
        for (std::size_t k = 0; k < K; ++k) chain.cell_edges.push_back(lo + w * static_cast<double>(k) / static_cast<double>(K));
    }
    chain.cell_edges.push_back(grid.band_high());
    for (std::size_t c = 0; c < chain.cells; ++c) {
        chain.cell_centers.push_back(0.5 * (chain.cell_edges[c] + chain.cell_edges[c + 1]));
    }

    const std::size_t N = chain.cells;
    chain.nodes.resize(N * (p + 1) + 2 * p + 1);
    for (std::size_t c = 0; c < N; ++c) {
        for (std::size_t i = 0; i < p; ++i) chain.nodes[chain.regular(c, i)] = {NodeKind::regular, c, i, chain.cell_centers[c]};
        chain.nodes[chain.reset(c)] = {NodeKind::reset, c, p, chain.cell_centers[c]};
    }
    for (std::size_t i = 0; i < p; ++i) {
        chain.nodes[chain.atom_low(i)] = {NodeKind::atom_low, 0, i, 0.0};
        chain.nodes[chain.atom_high(i)] = {NodeKind::atom_high, N - 1, i, grid.band_high()};
    }
    chain.nodes[chain.atom_restart()] = {NodeKind::atom_restart, 0, p, grid.start_level()};

    std::vector<Eigen::Triplet<double>> triplets;
    std::vector<double> outflow(chain.size(), 0.0);
    auto add = [&](std::size_t from, std::size_t to, double rate) {
        if (rate <= 0.0) return;
        triplets.emplace_back(idx(from), idx(to), rate);
        outflow[from] += rate;
    };

    // Last cell below u; the restart atom sits between it and the next cell.
    const std::size_t split = static_cast<std::size_t>(grid.M()) * K;
    std::vector<char> upwind_seen(p * nb, 0);

    for (std::size_t c = 0; c < N; ++c) {
        const std::size_t b = c / K;
        const Eigen::MatrixXd& Q = qrs.q_band[b];
        const Eigen::VectorXd& R = qrs.r_band[b];
        const Eigen::VectorXd& S = qrs.s_band[b];
        const double center = chain.cell_centers[c];
        const double h_down = c == 0 ? center : center - chain.cell_centers[c - 1];
        const double h_up = c + 1 == N ? grid.band_high() - center : chain.cell_centers[c + 1] - center;

        for (std::size_t i = 0; i < p; ++i) {
            const std::size_t node = chain.regular(c, i);
            const CellRates rates = cell_rates(R(idx(i)), S(idx(i)), h_down, h_up);
            if (rates.upwind && !upwind_seen[i * nb + b]) {
                upwind_seen[i * nb + b] = 1;
                chain.upwind.push_back({i, b});
            }
            add(node, c + 1 == N ? chain.atom_high(i) : chain.regular(c + 1, i), rates.up);
            add(node, c == 0 ? chain.atom_low(i) : chain.regular(c - 1, i), rates.down);
            for (std::size_t j = 0; j < p; ++j) {
                if (j != i) add(node, chain.regular(c, j), Q(idx(i), idx(j)));
            }
            add(node, chain.reset(c), Q(idx(i), idx(p)));
        }

        // Reset state: unit speed toward u.
        const std::size_t node = chain.reset(c);
        if (R(idx(p)) > 0.0) {
            const bool last = c + 1 == split;
            const double dist = last ? grid.start_level() - center : chain.cell_centers[c + 1] - center;
            add(node, last ? chain.atom_restart() : chain.reset(c + 1), R(idx(p)) / dist);
        } else {
            const bool first = c == split;
            const double dist = first ? center - grid.start_level() : center - chain.cell_centers[c - 1];
            add(node, first ? chain.atom_restart() : chain.reset(c - 1), -R(idx(p)) / dist);
        }
    }

    const Eigen::MatrixXd& q_low = qrs.q_point.front();
    const Eigen::MatrixXd& q_high = qrs.q_point.back();
    for (std::size_t i = 0; i < p; ++i) {
        add(chain.atom_low(i), chain.reset(0), q_low(idx(i), idx(p)));
        add(chain.atom_high(i), chain.reset(N - 1), q_high(idx(i), idx(p)));
    }
    // Restart atom: leaves at the reset row's rates of the zeta_0 block,
    // split evenly between the two cells adjacent to u.
    const Eigen::MatrixXd& q_zero = qrs.q_point[static_cast<std::size_t>(grid.M())];
    for (std::size_t j = 0; j < p; ++j) {
        const double rate = q_zero(idx(p), idx(j));
        add(chain.atom_restart(), chain.regular(split - 1, j), 0.5 * rate);
        add(chain.atom_restart(), chain.regular(split, j), 0.5 * rate);
    }

    for (std::size_t k = 0; k < chain.size(); ++k) {
        if (outflow[k] > 0.0) triplets.emplace_back(idx(k), idx(k), -outflow[k]);
    }
    chain.generator.resize(idx(chain.size()), idx(chain.size()));
    chain.generator.setFromTriplets(triplets.begin(), triplets.end());
    chain.generator.makeCompressed();

    auto describe = [&](std::size_t k) {
        const ChainNode& nd = chain.nodes[k];
        std::ostringstream msg;
        msg << to_string(nd.kind) << " node (state " << (nd.state == p ? std::string("reset") : std::to_string(nd.state + 1))
            << ", level " << nd.level << ", band " << nd.cell / K + 1 << ")";
        return msg.str();
    };

    for (std::size_t k = 0; k < chain.size(); ++k) {
        if (outflow[k] == 0.0) {
            throw ModelError("absorbing trap: " + describe(k) +
                             " has zero drift, zero diffusion and no exit; the excursion has infinite mean length");
        }
    }

    // Every node must lead back to the restart atom, otherwise the
    // regenerative cycle is broken and the stationary law is not unique.
    std::vector<std::vector<std::size_t>> reverse(chain.size());
    for (Index r = 0; r < chain.generator.outerSize(); ++r) {
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(chain.generator, r); it; ++it) {
            if (it.col() != r && it.value() > 0.0) reverse[static_cast<std::size_t>(it.col())].push_back(static_cast<std::size_t>(r));
        }
    }
    std::vector<char> seen(chain.size(), 0);
    std::deque<std::size_t> queue{chain.atom_restart()};
    seen[chain.atom_restart()] = 1;
    while (!queue.empty()) {
        const std::size_t k = queue.front();
        queue.pop_front();
        for (std::size_t from : reverse[k]) {
            if (!seen[from]) {
                seen[from] = 1;
                queue.push_back(from);
            }
        }
    }
    for (std::size_t k = 0; k < chain.size(); ++k) {
        if (!seen[k]) throw ModelError("trapped region: " + describe(k) + " cannot return to the restart atom");
    }
    return chain;
}

StationarySolve stationary_distribution(const Eigen::SparseMatrix<double, Eigen::RowMajor>& generator,
                                        double tol) {
    const Index n = generator.rows();
    if (n == 0 || generator.cols() != n) throw NumericalError("generator must be square and nonempty");
    const Index norm_row = n - 1;

    // A = G^T with the last balance equation replaced by sum(pi) = 1.
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(generator.nonZeros() + n));
    for (Index r = 0; r < n; ++r) {
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(generator, r); it; ++it) {
            if (it.col() != norm_row) triplets.emplace_back(it.col(), r, it.value());
        }
        triplets.emplace_back(norm_row, r, 1.0);
    }
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(triplets.begin(), triplets.end());
    A.makeCompressed();

    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success) {
        throw NumericalError("stationary solve: singular system (" + lu.lastErrorMessage() + ")");
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(norm_row) = 1.0;

    StationarySolve out;
    out.pi = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !out.pi.allFinite()) throw NumericalError("stationary solve failed");

    // Residual of pi G, accumulated in long double.
    auto balance_residual = [&](const Eigen::VectorXd& pi, std::vector<long double>& acc) {
        std::fill(acc.begin(), acc.end(), 0.0L);
        for (Index r = 0; r < n; ++r) {
            const long double w = pi(r);
            for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(generator, r); it; ++it) {
                acc[static_cast<std::size_t>(it.col())] += w * static_cast<long double>(it.value());
            }
        }
    };
    std::vector<long double> acc(static_cast<std::size_t>(n));
    auto measure = [&](const Eigen::VectorXd& pi) {
        balance_residual(pi, acc);
        long double worst = 0.0L;
        for (long double v : acc) worst = std::max(worst, std::abs(v));
        return static_cast<double>(worst);
    };

    double residual = measure(out.pi);
    for (int step = 0; step < 6 && residual > 1e-3 * tol; ++step) {
        // r = rhs - A pi, with A's rows being the balance equations.
        Eigen::VectorXd r(n);
        long double total = 0.0L;
        for (Index k = 0; k < n; ++k) total += out.pi(k);
        for (Index k = 0; k < n; ++k) r(k) = static_cast<double>(-acc[static_cast<std::size_t>(k)]);
        r(norm_row) = static_cast<double>(1.0L - total);
        const Eigen::VectorXd delta = lu.solve(r);
        Eigen::VectorXd candidate = out.pi + delta;
        const double next = measure(candidate);
        ++out.refinement_steps;
        if (!(next < residual)) break;
        out.pi = std::move(candidate);
        residual = next;
    }

    const double floor = -std::max(1e-12, 100.0 * tol);
    for (Index k = 0; k < n; ++k) {
        if (out.pi(k) < floor) {
            std::ostringstream msg;
            msg << "stationary solve: negative probability " << out.pi(k) << " at node " << k;
            throw NumericalError(msg.str());
        }
        if (out.pi(k) <= 0.0) out.pi(k) = 0.0;
    }
    out.residual = measure(out.pi);
    long double total = 0.0L;
    for (Index k = 0; k < n; ++k) total += out.pi(k);
    out.normalization_error = static_cast<double>(std::abs(total - 1.0L));
    if (!(out.residual <= tol) || !(out.normalization_error <= tol)) {
        std::ostringstream msg;
        msg << "stationary solve: residual " << out.residual << " (normalization error "
            << out.normalization_error << ") exceeds tolerance " << tol;
        throw NumericalError(msg.str());
    }
    return out;
}

StationaryResult stationary(const DiscretizedChain& chain, double tol) {
    StationarySolve solve = stationary_distribution(chain.generator, tol);
    StationaryResult st;
    st.residual = solve.residual;
    st.normalization_error = solve.normalization_error;
    st.refinement_steps = solve.refinement_steps;
    st.pi = std::move(solve.pi);

    const std::size_t p = chain.states;
    for (std::size_t j = 0; j < p; ++j) {
        st.p_minus.push_back(st.pi(idx(chain.atom_low(j))));
        st.p_plus.push_back(st.pi(idx(chain.atom_high(j))));
    }
    st.p0 = st.pi(idx(chain.atom_restart()));
    st.F.assign(p, std::vector<double>(chain.cells + 1, 0.0));
    for (std::size_t j = 0; j < p; ++j) {
        long double cum = 0.0L;
        for (std::size_t c = 0; c < chain.cells; ++c) {
            cum += st.pi(idx(chain.regular(c, j)));
            st.F[j][c + 1] = static_cast<double>(cum);
        }
    }
    return st;
}

double PassageResult::occupation(std::size_t j, double b) const {
    const std::vector<double>& table = occupation_table.at(j);
    if (b <= edges.front()) return 0.0;
    if (b >= edges.back()) return table.back();
    const auto it = std::upper_bound(edges.begin(), edges.end(), b);
    const auto k = static_cast<std::size_t>(it - edges.begin());
    const double w = (b - edges[k - 1]) / (edges[k] - edges[k - 1]);
    return table[k - 1] + w * (table[k] - table[k - 1]);
}

double PassageResult::exit_probability() const noexcept {
    double s = 0.0;
    for (std::size_t j = 0; j < m_minus.size(); ++j) s += m_minus[j] + m_plus[j];
    return s;
}

PassageResult extract_passage(const StationaryResult& st, const DiscretizedChain& chain) {
    if (!(st.p0 > 0.0)) throw NumericalError("restart atom carries no stationary mass (p0 = 0)");
    PassageResult r;
    r.restart_state = chain.restart_state;
    r.edges = chain.cell_edges;
    for (std::size_t j = 0; j < chain.states; ++j) {
        r.m_minus.push_back(st.p_minus[j] / st.p0);
        r.m_plus.push_back(st.p_plus[j] / st.p0);
        std::vector<double> row(st.F[j].size());
        std::transform(st.F[j].begin(), st.F[j].end(), row.begin(), [&](double f) { return f / st.p0; });
        r.occupation_table.push_back(std::move(row));
    }
    return r;
}

PassageSolution solve_passage(const GridApproximation& approx, const SolveOptions& options) {
    const QrsSpec qrs = assemble_qrs(approx, approx.kill_rate, approx.start_state);
    const DiscretizedChain chain = discretize(qrs, options.cells_per_band);
    const StationaryResult st = stationary(chain, options.tol);
    PassageSolution sol;
    sol.passage = extract_passage(st, chain);
    sol.residual = st.residual;
    sol.normalization_error = st.normalization_error;
    sol.refinement_steps = st.refinement_steps;
    sol.chain_size = chain.size();
    sol.upwind = chain.upwind;
    return sol;
}

std::string passage_csv(const PassageResult& result) {
    CsvWriter csv({"j", "m_minus", "m_plus"});
    for (std::size_t j = 0; j < result.states(); ++j) {
        csv.field(j + 1).field(result.m_minus[j]).field(result.m_plus[j]);
        csv.end_row();
    }
    return csv.str();
}

std::string occupation_csv(const PassageResult& result, const std::vector<double>& levels) {
    CsvWriter csv({"b", "j", "O"});
    for (double b : levels) {
        for (std::size_t j = 0; j < result.states(); ++j) {
            csv.field(b).field(j + 1).field(result.occupation(j, b));
            csv.end_row();
        }
    }
    return csv.str();
}

std::string chain_nodes_csv(const DiscretizedChain& chain) {
    CsvWriter csv({"index", "kind", "cell", "state", "level"});
    for (std::size_t k = 0; k < chain.size(); ++k) {
        const ChainNode& nd = chain.nodes[k];
        csv.field(k).field(to_string(nd.kind)).field(nd.cell);
        if (nd.state == chain.states) {
            csv.field(std::string_view("reset"));
        } else {
            csv.field(nd.state + 1);
        }
        csv.field(nd.level);
        csv.end_row();
    }
    return csv.str();
}

std::string chain_triplets_csv(const DiscretizedChain& chain) {
    CsvWriter csv({"row", "col", "rate"});
    for (Index r = 0; r < chain.generator.outerSize(); ++r) {
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(chain.generator, r); it; ++it) {
            csv.field(static_cast<long long>(r)).field(static_cast<long long>(it.col())).field(it.value());
            csv.end_row();
        }
    }
    return csv.str();
}

}  // namespace hsde
