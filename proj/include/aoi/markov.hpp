#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "aoi/error.hpp"
#include "aoi/matrix.hpp"

namespace aoi {

/// Limit distribution of a finite Markov chain started from a given
/// distribution.
///
/// The result is the Cesaro limit lim (1/n) sum_t start * P^t, which exists
/// for every chain: periodic, reducible, or with transient states. It is
/// computed exactly rather than by averaging iterates:
///
///   1. states reachable from the support of `start` are found;
///   2. their closed communicating classes are identified (Tarjan SCC);
///   3. each closed class is solved by GTH state reduction, which needs no
///      subtraction and is stable for any irreducible chain, periodic or not;
///   4. with several closed classes, the class distributions are weighted by
///      the absorption probabilities from `start`.
///
/// The answer is checked against `tol` as an L1 stationarity residual.
/// Elimination runs over sparse rows in descending state order, which keeps
/// fill-in O(1) per state for chain-shaped protocols such as the pause
/// countdown of age-threshold ALOHA.
///
/// The solver keeps its workspaces between calls; reuse one instance across
/// repeated solves of same-sized chains.
class StationarySolver {
public:
    std::vector<double> solve(const SparsePair& chain, std::span<const double> start, double tol) {
        std::vector<double> out(chain.size(), 0.0);
        solve_into(chain, start, tol, out);
        return out;
    }

    /// Solves using the mixed values of `chain`; result written to `out`.
    void solve_into(const SparsePair& chain, std::span<const double> start, double tol,
                    std::span<double> out) {
        const std::size_t n = chain.size();
        if (start.size() != n || out.size() != n)
            throw ParameterError("stationary_distribution: start has wrong length");
        find_reachable(chain, start);
        find_closed_classes(chain);

        std::fill(out.begin(), out.end(), 0.0);
        if (closed_.size() == 1) {
            solve_class(chain, closed_[0], out, 1.0);
        } else {
            const auto weights = absorption_weights(chain, start);
            for (std::size_t c = 0; c < closed_.size(); ++c)
                if (weights[c] > 0.0) solve_class(chain, closed_[c], out, weights[c]);
        }
        normalize(out);
        polish(chain, tol, out);
    }

    /// L1 norm of (x * P - x) for the mixed values of `chain`.
    static double residual(const SparsePair& chain, std::span<const double> x,
                           std::vector<double>& scratch) {
        scratch.resize(chain.size());
        chain.left_multiply(x, scratch);
        return l1_distance(scratch, x);
    }

private:
    static bool positive(double v) { return v > 0.0; }

    void find_reachable(const SparsePair& chain, std::span<const double> start) {
        const std::size_t n = chain.size();
        reachable_.assign(n, 0);
        stack_.clear();
        for (std::size_t i = 0; i < n; ++i) {
            if (start[i] < 0.0) throw ParameterError("start distribution has a negative entry");
            if (start[i] > 0.0) {
                reachable_[i] = 1;
                stack_.push_back(i);
            }
        }
        if (stack_.empty()) throw ParameterError("start distribution has no mass");
        while (!stack_.empty()) {
            const std::size_t i = stack_.back();
            stack_.pop_back();
            for (std::size_t k = chain.row_begin(i); k < chain.row_end(i); ++k) {
                const std::size_t j = chain.col(k);
                if (positive(chain.value(k)) && !reachable_[j]) {
                    reachable_[j] = 1;
                    stack_.push_back(j);
                }
            }
        }
    }

    // Iterative Tarjan over the reachable subgraph; fills closed_ with the
    // member lists (ascending) of every class that has no exit edge.
    void find_closed_classes(const SparsePair& chain) {
        const std::size_t n = chain.size();
        constexpr std::size_t unvisited = static_cast<std::size_t>(-1);
        index_.assign(n, unvisited);
        low_.assign(n, 0);
        on_stack_.assign(n, 0);
        component_.assign(n, unvisited);
        scc_stack_.clear();
        closed_.clear();
        std::size_t counter = 0;
        std::size_t components = 0;
        std::vector<std::vector<std::size_t>> members;

        for (std::size_t root = 0; root < n; ++root) {
            if (!reachable_[root] || index_[root] != unvisited) continue;
            call_.clear();
            call_.emplace_back(root, chain.row_begin(root));
            index_[root] = low_[root] = counter++;
            scc_stack_.push_back(root);
            on_stack_[root] = 1;
            while (!call_.empty()) {
                auto& [v, edge] = call_.back();
                if (edge < chain.row_end(v)) {
                    const std::size_t k = edge++;
                    if (!positive(chain.value(k))) continue;
                    const std::size_t w = chain.col(k);
                    if (index_[w] == unvisited) {
                        index_[w] = low_[w] = counter++;
                        scc_stack_.push_back(w);
                        on_stack_[w] = 1;
                        call_.emplace_back(w, chain.row_begin(w));
                    } else if (on_stack_[w]) {
                        low_[v] = std::min(low_[v], index_[w]);
                    }
                    continue;
                }
                const std::size_t v_done = v;
                call_.pop_back();
                if (!call_.empty()) {
                    const std::size_t parent = call_.back().first;
                    low_[parent] = std::min(low_[parent], low_[v_done]);
                }
                if (low_[v_done] == index_[v_done]) {
                    members.emplace_back();
                    std::size_t w;
                    do {
                        w = scc_stack_.back();
                        scc_stack_.pop_back();
                        on_stack_[w] = 0;
                        component_[w] = components;
                        members.back().push_back(w);
                    } while (w != v_done);
                    ++components;
                }
            }
        }

        for (std::size_t c = 0; c < components; ++c) {
            bool closed = true;
            for (std::size_t i : members[c]) {
                for (std::size_t k = chain.row_begin(i); k < chain.row_end(i) && closed; ++k)
                    if (positive(chain.value(k)) && component_[chain.col(k)] != c) closed = false;
                if (!closed) break;
            }
            if (closed) {
                std::sort(members[c].begin(), members[c].end());
                closed_.push_back(std::move(members[c]));
            }
        }
        std::sort(closed_.begin(), closed_.end());
    }

    // GTH reduction on one closed class; adds weight * pi into `out`.
    void solve_class(const SparsePair& chain, const std::vector<std::size_t>& states,
                     std::span<double> out, double weight) {
        const std::size_t m = states.size();
        if (m == 1) {
            out[states[0]] += weight;
            return;
        }
        local_.assign(chain.size(), static_cast<std::size_t>(-1));
        for (std::size_t a = 0; a < m; ++a) local_[states[a]] = a;

        rows_.resize(m);
        preds_.resize(m);
        for (std::size_t a = 0; a < m; ++a) {
            rows_[a].clear();
            preds_[a].clear();
        }
        for (std::size_t a = 0; a < m; ++a) {
            const std::size_t i = states[a];
            for (std::size_t k = chain.row_begin(i); k < chain.row_end(i); ++k) {
                const double v = chain.value(k);
                const std::size_t b = local_[chain.col(k)];
                if (!positive(v) || b == a) continue;
                rows_[a].emplace_back(b, v);
                preds_[b].push_back(a);
            }
        }

        pos_.assign(m, static_cast<std::size_t>(-1));
        pivot_.assign(m, 0.0);
        for (std::size_t k = m - 1; k >= 1; --k) {
            double s = 0.0;
            for (const auto& [j, v] : rows_[k])
                if (j < k) s += v;
            if (!(s > 0.0))
                throw ConvergenceError("stationary_distribution: zero pivot in state reduction", {});
            pivot_[k] = s;
            for (std::size_t i : preds_[k]) {
                if (i >= k) continue;
                auto& row = rows_[i];
                for (std::size_t e = 0; e < row.size(); ++e) pos_[row[e].first] = e;
                double pik = 0.0;
                if (pos_[k] != static_cast<std::size_t>(-1)) pik = row[pos_[k]].second;
                if (pik != 0.0) {
                    const double a = pik / s;
                    for (const auto& [j, v] : rows_[k]) {
                        if (j >= k || j == i) continue;
                        if (pos_[j] == static_cast<std::size_t>(-1)) {
                            pos_[j] = row.size();
                            row.emplace_back(j, 0.0);
                            preds_[j].push_back(i);
                        }
                        row[pos_[j]].second += a * v;
                    }
                }
                for (const auto& entry : row) pos_[entry.first] = static_cast<std::size_t>(-1);
            }
        }

        pi_.assign(m, 0.0);
        pi_[0] = 1.0;
        for (std::size_t k = 1; k < m; ++k) {
            double acc = 0.0;
            for (std::size_t i : preds_[k]) {
                if (i >= k) continue;
                for (const auto& [j, v] : rows_[i])
                    if (j == k) acc += pi_[i] * v;
            }
            pi_[k] = acc / pivot_[k];
        }

        double total = 0.0;
        for (double v : pi_) total += v;
        for (std::size_t a = 0; a < m; ++a) out[states[a]] += weight * pi_[a] / total;
    }

    // Probability that the chain started at `start` ends in each closed class.
    std::vector<double> absorption_weights(const SparsePair& chain, std::span<const double> start) {
        const std::size_t n = chain.size();
        std::vector<std::size_t> class_of(n, closed_.size());
        for (std::size_t c = 0; c < closed_.size(); ++c)
            for (std::size_t i : closed_[c]) class_of[i] = c;

        std::vector<double> weights(closed_.size(), 0.0);
        std::vector<std::size_t> transient;
        std::vector<std::size_t> t_index(n, static_cast<std::size_t>(-1));
        for (std::size_t i = 0; i < n; ++i) {
            if (!reachable_[i]) continue;
            if (class_of[i] < closed_.size()) {
                weights[class_of[i]] += start[i];
            } else {
                t_index[i] = transient.size();
                transient.push_back(i);
            }
        }
        const std::size_t t = transient.size();
        if (t > 0) {
            // Expected visits x solve x (I - Q) = start_T; solved as
            // (I - Q)^T x^T = start_T^T with partial pivoting.
            Matrix a(t, t);
            std::vector<double> b(t);
            for (std::size_t r = 0; r < t; ++r) {
                a(r, r) = 1.0;
                b[r] = start[transient[r]];
            }
            for (std::size_t r = 0; r < t; ++r) {
                const std::size_t i = transient[r];
                for (std::size_t k = chain.row_begin(i); k < chain.row_end(i); ++k) {
                    const std::size_t c = t_index[chain.col(k)];
                    if (c != static_cast<std::size_t>(-1)) a(c, r) -= chain.value(k);
                }
            }
            const auto x = solve_dense(std::move(a), std::move(b));
            for (std::size_t r = 0; r < t; ++r) {
                const std::size_t i = transient[r];
                for (std::size_t k = chain.row_begin(i); k < chain.row_end(i); ++k) {
                    const std::size_t c = class_of[chain.col(k)];
                    if (c < closed_.size() && reachable_[chain.col(k)])
                        weights[c] += x[r] * chain.value(k);
                }
            }
        }
        double total = 0.0;
        for (double w : weights) total += w;
        for (double& w : weights) w /= total;
        return weights;
    }

    static std::vector<double> solve_dense(Matrix a, std::vector<double> b) {
        const std::size_t n = b.size();
        for (std::size_t col = 0; col < n; ++col) {
            std::size_t piv = col;
            for (std::size_t r = col + 1; r < n; ++r)
                if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
            if (a(piv, col) == 0.0)
                throw ConvergenceError("stationary_distribution: singular absorption system", {});
            if (piv != col) {
                for (std::size_t c = 0; c < n; ++c) std::swap(a(piv, c), a(col, c));
                std::swap(b[piv], b[col]);
            }
            for (std::size_t r = col + 1; r < n; ++r) {
                const double f = a(r, col) / a(col, col);
                if (f == 0.0) continue;
                for (std::size_t c = col; c < n; ++c) a(r, c) -= f * a(col, c);
                b[r] -= f * b[col];
            }
        }
        std::vector<double> x(n);
        for (std::size_t r = n; r-- > 0;) {
            double acc = b[r];
            for (std::size_t c = r + 1; c < n; ++c) acc -= a(r, c) * x[c];
            x[r] = acc / a(r, r);
        }
        return x;
    }

    static void normalize(std::span<double> x) {
        double total = 0.0;
        for (double v : x) total += v;
        for (double& v : x) v /= total;
    }

    // Lazy power steps (x <- (x + xP) / 2) leave every stationary vector
    // fixed and damp periodic components, so they can only tighten an
    // already-accurate answer.
    void polish(const SparsePair& chain, double tol, std::span<double> x) {
        constexpr int kMaxPolishSteps = 1000;
        double r = residual(chain, x, scratch_);
        std::vector<double> history{r};
        for (int step = 0; step < kMaxPolishSteps && !(r <= tol); ++step) {
            for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.5 * (x[i] + scratch_[i]);
            normalize(x);
            r = residual(chain, x, scratch_);
            history.push_back(r);
        }
        if (!(r <= tol))
            throw ConvergenceError("stationary_distribution: residual " + std::to_string(r) +
                                       " above tolerance",
                                   std::move(history));
    }

    std::vector<char> reachable_;
    std::vector<std::size_t> stack_;
    std::vector<std::size_t> index_, low_, component_;
    std::vector<char> on_stack_;
    std::vector<std::size_t> scc_stack_;
    std::vector<std::pair<std::size_t, std::size_t>> call_;
    std::vector<std::vector<std::size_t>> closed_;

    std::vector<std::size_t> local_;
    std::vector<std::vector<std::pair<std::size_t, double>>> rows_;
    std::vector<std::vector<std::size_t>> preds_;
    std::vector<std::size_t> pos_;
    std::vector<double> pivot_;
    std::vector<double> pi_;
    std::vector<double> scratch_;
};

/// Convenience wrapper for a dense row-stochastic matrix.
inline std::vector<double> stationary_distribution(const Matrix& p, std::span<const double> start,
                                                   double tol = 1e-12) {
    if (!p.square()) throw ParameterError("stationary_distribution: matrix is not square");
    SparsePair chain(p, p);
    StationarySolver solver;
    return solver.solve(chain, start, tol);
}

}  // namespace aoi
