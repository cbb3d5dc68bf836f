#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <utility>
#include <vector>

namespace pwni {

/// Affine function c + sum_i a_i x_i of the global unknown vector.
///
/// The chain relations are linear in the scalar unknowns, so evaluating them
/// with this type yields their residual rows and Jacobian rows in one pass.
class LinearForm {
public:
    LinearForm() = default;
    LinearForm(double c) : constant_(c) {}  // NOLINT(google-explicit-constructor)

    static LinearForm unknown(int index, double coeff = 1.0) {
        LinearForm f;
        f.terms_.emplace_back(index, coeff);
        return f;
    }

    [[nodiscard]] double constant() const { return constant_; }
    [[nodiscard]] const std::vector<std::pair<int, double>>& terms() const { return terms_; }

    LinearForm& operator+=(const LinearForm& o) {
        constant_ += o.constant_;
        terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
        compress();
        return *this;
    }
    LinearForm& operator-=(const LinearForm& o) { return *this += -o; }
    LinearForm& operator*=(double s) {
        constant_ *= s;
        for (auto& t : terms_) {
            t.second *= s;
        }
        return *this;
    }
    LinearForm& operator/=(double s) { return *this *= 1.0 / s; }

    friend LinearForm operator-(LinearForm a) { return a *= -1.0; }
    friend LinearForm operator+(LinearForm a, const LinearForm& b) { return a += b; }
    friend LinearForm operator-(LinearForm a, const LinearForm& b) { return a -= b; }
    friend LinearForm operator*(LinearForm a, double s) { return a *= s; }
    friend LinearForm operator*(double s, LinearForm a) { return a *= s; }
    friend LinearForm operator/(LinearForm a, double s) { return a /= s; }

    [[nodiscard]] double eval(const Eigen::VectorXd& x) const {
        double v = constant_;
        for (const auto& [i, a] : terms_) {
            v += a * x[i];
        }
        return v;
    }

private:
    // Merge duplicate indices; keeps terms sorted so evaluation order is fixed.
    void compress() {
        std::stable_sort(terms_.begin(), terms_.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        std::size_t out = 0;
        for (std::size_t i = 0; i < terms_.size(); ++i) {
            if (out > 0 && terms_[out - 1].first == terms_[i].first) {
                terms_[out - 1].second += terms_[i].second;
            } else {
                terms_[out++] = terms_[i];
            }
        }
        terms_.resize(out);
    }

    double constant_ = 0.0;
    std::vector<std::pair<int, double>> terms_;
};

}  // namespace pwni
