#pragma once

// Brute-force solver for the epsilon-SVR dual in the signed variables beta:
//
//   max  -1/2 beta' K beta - epsilon |beta|_1 + y' beta
//   s.t. sum beta = 0,  -C <= beta_i <= C
//
// Every coordinate is assigned one of five states (-C, free negative, 0,
// free positive, +C). On each pattern the free coordinates solve the
// bordered stationarity system; feasible solutions are scored and the best
// one is returned. The objective is concave, so the maximizer is stationary
// on the face it lies in and some pattern finds it. Requires K_FF to be
// nonsingular on the faces that matter (a PD kernel matrix), n <= 8.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace oracle {

struct QpSolution {
    std::vector<double> beta;
    double objective = -std::numeric_limits<double>::infinity();
};

inline double dual_value(const Eigen::MatrixXd& k, const Eigen::VectorXd& y, double epsilon,
                         const Eigen::VectorXd& beta) {
    return -0.5 * beta.dot(k * beta) - epsilon * beta.cwiseAbs().sum() + y.dot(beta);
}

inline std::optional<QpSolution> brute_force_svr_dual(const Eigen::MatrixXd& k, const Eigen::VectorXd& y,
                                                      double c, double epsilon) {
    const int n = static_cast<int>(y.size());
    if (n > 8) {
        return std::nullopt;
    }
    const double feas_tol = 1e-10;
    std::vector<int> state(n, 0);
    QpSolution best;
    bool found = false;
    long long total = 1;
    for (int i = 0; i < n; ++i) {
        total *= 5;
    }
    for (long long code = 0; code < total; ++code) {
        long long rest = code;
        for (int i = 0; i < n; ++i) {
            state[i] = static_cast<int>(rest % 5);  // 0:-C 1:free- 2:0 3:free+ 4:+C
            rest /= 5;
        }
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
        std::vector<int> free_idx;
        for (int i = 0; i < n; ++i) {
            if (state[i] == 0) {
                beta[i] = -c;
            } else if (state[i] == 4) {
                beta[i] = c;
            } else if (state[i] == 1 || state[i] == 3) {
                free_idx.push_back(i);
            }
        }
        const int f = static_cast<int>(free_idx.size());
        if (f == 0) {
            if (std::abs(beta.sum()) > feas_tol) {
                continue;
            }
        } else {
            // [K_FF 1; 1' 0] [beta_F; b] = [y_F - eps sigma_F - K_FB beta_B; -sum beta_B]
            Eigen::MatrixXd a = Eigen::MatrixXd::Zero(f + 1, f + 1);
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(f + 1);
            for (int r = 0; r < f; ++r) {
                const int i = free_idx[r];
                const double sigma = state[i] == 3 ? 1.0 : -1.0;
                for (int q = 0; q < f; ++q) {
                    a(r, q) = k(i, free_idx[q]);
                }
                a(r, f) = 1.0;
                a(f, r) = 1.0;
                rhs[r] = y[i] - epsilon * sigma - k.row(i).dot(beta);
            }
            rhs[f] = -beta.sum();
            Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
            if (!lu.isInvertible()) {
                continue;
            }
            const Eigen::VectorXd sol = lu.solve(rhs);
            if ((a * sol - rhs).norm() > 1e-9 * (1.0 + rhs.norm())) {
                continue;
            }
            bool ok = true;
            for (int r = 0; r < f && ok; ++r) {
                const int i = free_idx[r];
                const double v = sol[r];
                if (state[i] == 3) {
                    ok = v >= -feas_tol && v <= c + feas_tol;
                } else {
                    ok = v <= feas_tol && v >= -c - feas_tol;
                }
                beta[i] = std::clamp(v, -c, c);
            }
            if (!ok) {
                continue;
            }
        }
        const double obj = dual_value(k, y, epsilon, beta);
        if (obj > best.objective) {
            best.objective = obj;
            best.beta.assign(beta.data(), beta.data() + n);
            found = true;
        }
    }
    if (!found) {
        return std::nullopt;
    }
    return best;
}

}  // namespace oracle
