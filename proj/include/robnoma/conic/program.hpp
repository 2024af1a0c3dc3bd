#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "../errors.hpp"
#include "../linalg.hpp"

namespace robnoma::conic {

// Affine expression sum_i coef_i * x[var_i] + constant.
struct LinExpr {
    std::vector<std::pair<int, double>> terms;
    double constant = 0.0;

    LinExpr() = default;
    explicit LinExpr(double c) : constant(c) {}

    LinExpr& add(int var, double coef) {
        if (coef != 0.0) terms.emplace_back(var, coef);
        return *this;
    }
    LinExpr& operator+=(const LinExpr& o) {
        terms.insert(terms.end(), o.terms.begin(), o.terms.end());
        constant += o.constant;
        return *this;
    }
    LinExpr& operator*=(double s) {
        for (auto& t : terms) t.second *= s;
        constant *= s;
        return *this;
    }
    LinExpr& operator+=(double c) {
        constant += c;
        return *this;
    }
    friend LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
    friend LinExpr operator*(double s, LinExpr a) { return a *= s; }
    friend LinExpr operator-(LinExpr a, const LinExpr& b) {
        LinExpr nb = b;
        nb *= -1.0;
        return a += nb;
    }

    // Merges duplicate variables and drops exact zeros.
    void compress() {
        std::sort(terms.begin(), terms.end(), [](auto& l, auto& r) { return l.first < r.first; });
        std::vector<std::pair<int, double>> out;
        for (auto& t : terms) {
            if (!out.empty() && out.back().first == t.first)
                out.back().second += t.second;
            else
                out.push_back(t);
        }
        out.erase(std::remove_if(out.begin(), out.end(), [](auto& t) { return t.second == 0.0; }), out.end());
        terms = std::move(out);
    }

    double max_abs_coef() const {
        double m = 0.0;
        for (auto& t : terms) m = std::max(m, std::abs(t.second));
        return m;
    }

    double eval(const RVec& x) const {
        double v = constant;
        for (auto& t : terms) v += t.second * x(t.first);
        return v;
    }
};

enum class BlockKind { Scalar, Hermitian };

struct VarBlock {
    std::string name;
    BlockKind kind;
    int dim;     // count for scalars, matrix order for Hermitian
    int offset;  // first variable index
    int size;    // number of real variables
};

enum class ConeKind { Zero, NonNeg, SOC, PSD };

inline const char* to_string(ConeKind k) {
    switch (k) {
        case ConeKind::Zero: return "zero";
        case ConeKind::NonNeg: return "nonneg";
        case ConeKind::SOC: return "soc";
        case ConeKind::PSD: return "psd";
    }
    return "?";
}

// Zero: every row == 0. NonNeg: every row >= 0. SOC: rows[0] >= ||rows[1:]||.
// PSD: rows are the hvec coordinates of a Hermitian matrix of order psd_dim, which must be PSD.
struct Constraint {
    ConeKind kind;
    std::vector<LinExpr> rows;
    int psd_dim = 0;
    std::string tag;
};

// Number of real coordinates of an n x n Hermitian matrix.
inline int hvec_size(int n) { return n * n; }

// hvec layout: diagonal first, then sqrt(2) Re and sqrt(2) Im of the strict
// upper triangle in row-major order. <hvec X, hvec Y> = trace(X Y).
inline int hvec_offdiag(int n, int i, int j) {
    // position of pair (i, j), i < j, among the n(n-1)/2 pairs
    return n + 2 * (i * n - i * (i + 1) / 2 + (j - i - 1));
}

inline RVec hvec(const CMat& X) {
    const int n = static_cast<int>(X.rows());
    RVec v(hvec_size(n));
    const double r2 = std::sqrt(2.0);
    for (int i = 0; i < n; ++i) v(i) = X(i, i).real();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const int p = hvec_offdiag(n, i, j);
            v(p) = r2 * X(i, j).real();
            v(p + 1) = r2 * X(i, j).imag();
        }
    return v;
}

inline CMat hmat(const double* v, int n) {
    CMat X(n, n);
    const double s = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < n; ++i) X(i, i) = v[i];
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const int p = hvec_offdiag(n, i, j);
            X(i, j) = cplx(s * v[p], s * v[p + 1]);
            X(j, i) = std::conj(X(i, j));
        }
    return X;
}

inline CMat hmat(const RVec& v, int n) { return hmat(v.data(), n); }

// Hermitian basis E_p with hvec(E_p) = unit vector p.
inline CMat hbasis(int n, int p) {
    RVec e = RVec::Zero(hvec_size(n));
    e(p) = 1.0;
    return hmat(e, n);
}

// Solver-agnostic description: minimize objective subject to the constraints.
class ConicProgram {
public:
    int add_scalars(const std::string& name, int count) {
        require_structure(count >= 1, "scalar block must be non-empty");
        blocks_.push_back({name, BlockKind::Scalar, count, nvars_, count});
        nvars_ += count;
        return static_cast<int>(blocks_.size()) - 1;
    }

    int add_hermitian(const std::string& name, int n) {
        require_structure(n >= 1, "Hermitian block must be non-empty");
        blocks_.push_back({name, BlockKind::Hermitian, n, nvars_, hvec_size(n)});
        nvars_ += hvec_size(n);
        return static_cast<int>(blocks_.size()) - 1;
    }

    const VarBlock& block(int id) const {
        require_structure(id >= 0 && id < static_cast<int>(blocks_.size()), "unknown block");
        return blocks_[id];
    }
    const std::vector<VarBlock>& blocks() const { return blocks_; }
    int num_vars() const { return nvars_; }

    int var(int block_id, int i = 0) const {
        const VarBlock& b = block(block_id);
        require_structure(i >= 0 && i < b.size, "variable index out of block");
        return b.offset + i;
    }

    LinExpr scalar(int block_id, int i = 0) const {
        LinExpr e;
        e.add(var(block_id, i), 1.0);
        return e;
    }

    // trace(M X) for Hermitian block X; M is Hermitian of the block's order.
    LinExpr trace_with(int block_id, const CMat& M) const {
        const VarBlock& b = block(block_id);
        require_structure(b.kind == BlockKind::Hermitian, "trace_with needs a Hermitian block");
        require_structure(M.rows() == b.dim && M.cols() == b.dim, "trace_with dimension mismatch");
        RVec c = hvec(hermitian_part(M));
        LinExpr e;
        for (int p = 0; p < b.size; ++p) e.add(b.offset + p, c(p));
        return e;
    }

    // Affine Hermitian expression: coordinate p of hvec(X) as LinExpr.
    std::vector<LinExpr> hvec_of(int block_id) const {
        const VarBlock& b = block(block_id);
        require_structure(b.kind == BlockKind::Hermitian, "hvec_of needs a Hermitian block");
        std::vector<LinExpr> out(b.size);
        for (int p = 0; p < b.size; ++p) out[p].add(b.offset + p, 1.0);
        return out;
    }

    void add_constraint(Constraint c) {
        for (auto& r : c.rows) {
            r.compress();
            for (auto& t : r.terms) require_structure(t.first >= 0 && t.first < nvars_, "constraint references undeclared variable");
            require_structure(std::isfinite(r.constant), "non-finite constant in constraint");
        }
        switch (c.kind) {
            case ConeKind::SOC: require_structure(c.rows.size() >= 1, "empty second-order cone"); break;
            case ConeKind::PSD:
                require_structure(c.psd_dim >= 1 && static_cast<int>(c.rows.size()) == hvec_size(c.psd_dim),
                                  "PSD constraint row count must equal hvec size");
                break;
            default: require_structure(!c.rows.empty(), "empty constraint"); break;
        }
        cons_.push_back(std::move(c));
    }

    void add_zero(LinExpr e, std::string tag = {}) { add_constraint({ConeKind::Zero, {std::move(e)}, 0, std::move(tag)}); }
    void add_nonneg(LinExpr e, std::string tag = {}) { add_constraint({ConeKind::NonNeg, {std::move(e)}, 0, std::move(tag)}); }
    void add_soc(std::vector<LinExpr> rows, std::string tag = {}) {
        add_constraint({ConeKind::SOC, std::move(rows), 0, std::move(tag)});
    }
    void add_psd(int n, std::vector<LinExpr> rows, std::string tag = {}) {
        add_constraint({ConeKind::PSD, std::move(rows), n, std::move(tag)});
    }
    void add_psd_block(int block_id, std::string tag = {}) {
        add_psd(block(block_id).dim, hvec_of(block_id), std::move(tag));
    }

    void set_objective(LinExpr e, bool minimize = true) {
        e.compress();
        for (auto& t : e.terms) require_structure(t.first >= 0 && t.first < nvars_, "objective references undeclared variable");
        objective_ = std::move(e);
        minimize_ = minimize;
    }

    const LinExpr& objective() const { return objective_; }
    bool minimize() const { return minimize_; }
    const std::vector<Constraint>& constraints() const { return cons_; }

    int num_rows() const {
        int m = 0;
        for (auto& c : cons_) m += static_cast<int>(c.rows.size());
        return m;
    }

    CMat hermitian_value(int block_id, const RVec& x) const {
        const VarBlock& b = block(block_id);
        require_structure(b.kind == BlockKind::Hermitian, "not a Hermitian block");
        return hmat(x.data() + b.offset, b.dim);
    }

    // Text dump. Layout:
    //   program <nvars> <ncons> <minimize|maximize>
    //   block <name> <scalar|hermitian> <dim> <offset>
    //   objective <const> {<var>:<coef>}
    //   constraint <kind> <tag> <rows> <psd_dim>
    //     row <const> {<var>:<coef>}
    std::string dump(bool with_values = true) const {
        std::ostringstream os;
        os.precision(12);
        os << "program " << nvars_ << ' ' << cons_.size() << ' ' << (minimize_ ? "minimize" : "maximize") << '\n';
        for (auto& b : blocks_)
            os << "block " << b.name << ' ' << (b.kind == BlockKind::Scalar ? "scalar" : "hermitian") << ' ' << b.dim
               << ' ' << b.offset << '\n';
        auto expr = [&](const LinExpr& e) {
            if (with_values) os << e.constant;
            for (auto& t : e.terms) {
                os << ' ' << t.first;
                if (with_values) os << ':' << t.second;
            }
            os << '\n';
        };
        os << "objective ";
        expr(objective_);
        for (auto& c : cons_) {
            os << "constraint " << to_string(c.kind) << ' ' << (c.tag.empty() ? "-" : c.tag) << ' ' << c.rows.size()
               << ' ' << c.psd_dim << '\n';
            for (auto& r : c.rows) {
                os << "  row ";
                expr(r);
            }
        }
        return os.str();
    }

    // Dump without coefficients: equal strings mean identical structure.
    std::string structure() const { return dump(false); }

private:
    std::vector<VarBlock> blocks_;
    std::vector<Constraint> cons_;
    LinExpr objective_;
    bool minimize_ = true;
    int nvars_ = 0;
};

}  // namespace robnoma::conic
