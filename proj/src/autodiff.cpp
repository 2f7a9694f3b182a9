#include "relcap/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace relcap {

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

int Tape::push(Node n) {
    if (!n.value.all_finite())
        throw std::runtime_error("tape: non-finite value produced by op");
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::leaf(Matrix m) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(m);
    return {push(std::move(n))};
}

Var Tape::param(Parameter& p) {
    Node n;
    n.op = Op::Param;
    n.value = p.value;
    n.param = &p;
    return {push(std::move(n))};
}

Var Tape::matmul(Var a, Var b) {
    Node n;
    n.op = Op::MatMul;
    n.value = Matrix::multiply(nodes_[a.id].value, nodes_[b.id].value);
    n.parents = {a.id, b.id};
    return {push(std::move(n))};
}

Var Tape::transpose(Var a) {
    Node n;
    n.op = Op::Transpose;
    n.value = nodes_[a.id].value.transposed();
    n.parents = {a.id};
    return {push(std::move(n))};
}

Var Tape::add(Var a, Var b) {
    const Matrix& ma = nodes_[a.id].value;
    const Matrix& mb = nodes_[b.id].value;
    if (!ma.same_shape(mb))
        throw std::invalid_argument("add: shape mismatch " + ma.shape_str() + " vs " +
                                    mb.shape_str());
    Node n;
    n.op = Op::Add;
    n.value = ma;
    n.value.add_in_place(mb);
    n.parents = {a.id, b.id};
    return {push(std::move(n))};
}

Var Tape::scale(Var a, double s) {
    Node n;
    n.op = Op::Scale;
    n.value = nodes_[a.id].value;
    n.value.scale_in_place(s);
    n.scalar = s;
    n.parents = {a.id};
    return {push(std::move(n))};
}

Var Tape::add_row_broadcast(Var a, Var bias) {
    const Matrix& ma = nodes_[a.id].value;
    const Matrix& mb = nodes_[bias.id].value;
    if (mb.rows() != 1 || mb.cols() != ma.cols())
        throw std::invalid_argument("add_row_broadcast: bias " + mb.shape_str() +
                                    " does not match " + ma.shape_str());
    Node n;
    n.op = Op::AddRowVec;
    n.value = ma;
    for (std::size_t r = 0; r < ma.rows(); ++r)
        for (std::size_t c = 0; c < ma.cols(); ++c) n.value.at(r, c) += mb.at(0, c);
    n.parents = {a.id, bias.id};
    return {push(std::move(n))};
}

Var Tape::softmax_rows(Var a) {
    const Matrix& x = nodes_[a.id].value;
    Node n;
    n.op = Op::SoftmaxRows;
    n.value = Matrix(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double mx = -INFINITY;
        for (std::size_t c = 0; c < x.cols(); ++c) mx = std::max(mx, x.at(r, c));
        double sum = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) {
            const double e = std::exp(x.at(r, c) - mx);
            n.value.at(r, c) = e;
            sum += e;
        }
        for (std::size_t c = 0; c < x.cols(); ++c) n.value.at(r, c) /= sum;
    }
    n.parents = {a.id};
    return {push(std::move(n))};
}

Var Tape::col_normalize(Var a) {
    const Matrix& x = nodes_[a.id].value;
    Node n;
    n.op = Op::ColNormalize;
    n.value = Matrix(x.rows(), x.cols());
    n.aux = Matrix(1, x.cols());
    for (std::size_t c = 0; c < x.cols(); ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r) s += x.at(r, c);
        n.aux.at(0, c) = s;
        for (std::size_t r = 0; r < x.rows(); ++r) n.value.at(r, c) = x.at(r, c) / s;
    }
    n.parents = {a.id};
    return {push(std::move(n))};
}

Var Tape::layer_norm(Var a, Var gamma, Var beta, double eps) {
    const Matrix& x = nodes_[a.id].value;
    const Matrix& g = nodes_[gamma.id].value;
    const Matrix& b = nodes_[beta.id].value;
    if (g.rows() != 1 || g.cols() != x.cols() || b.rows() != 1 || b.cols() != x.cols())
        throw std::invalid_argument("layer_norm: gamma/beta must be 1x" +
                                    std::to_string(x.cols()));
    Node n;
    n.op = Op::LayerNorm;
    n.value = Matrix(x.rows(), x.cols());
    n.aux = Matrix(x.rows(), 2);  // per-row mean, rstd
    const double dc = static_cast<double>(x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double mean = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) mean += x.at(r, c);
        mean /= dc;
        double var = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) {
            const double d = x.at(r, c) - mean;
            var += d * d;
        }
        var /= dc;
        const double rstd = 1.0 / std::sqrt(var + eps);
        n.aux.at(r, 0) = mean;
        n.aux.at(r, 1) = rstd;
        for (std::size_t c = 0; c < x.cols(); ++c)
            n.value.at(r, c) = (x.at(r, c) - mean) * rstd * g.at(0, c) + b.at(0, c);
    }
    n.parents = {a.id, gamma.id, beta.id};
    return {push(std::move(n))};
}

Var Tape::gelu(Var a) {
    const Matrix& x = nodes_[a.id].value;
    Node n;
    n.op = Op::Gelu;
    n.value = Matrix(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x.data()[i];
        const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
        n.value.data()[i] = 0.5 * v * (1.0 + t);
    }
    n.parents = {a.id};
    return {push(std::move(n))};
}

Var Tape::mul_elem(Var a, Var b) {
    const Matrix& ma = nodes_[a.id].value;
    const Matrix& mb = nodes_[b.id].value;
    if (!ma.same_shape(mb))
        throw std::invalid_argument("mul_elem: shape mismatch " + ma.shape_str() + " vs " +
                                    mb.shape_str());
    Node n;
    n.op = Op::MulElem;
    n.value = Matrix(ma.rows(), ma.cols());
    for (std::size_t i = 0; i < ma.size(); ++i) n.value.data()[i] = ma.data()[i] * mb.data()[i];
    n.parents = {a.id, b.id};
    return {push(std::move(n))};
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty part list");
    std::size_t rows = 0;
    const std::size_t cols = nodes_[parts[0].id].value.cols();
    for (Var p : parts) {
        const Matrix& m = nodes_[p.id].value;
        if (m.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
        rows += m.rows();
    }
    Node n;
    n.op = Op::ConcatRows;
    n.value = Matrix(rows, cols);
    std::size_t r0 = 0;
    for (Var p : parts) {
        const Matrix& m = nodes_[p.id].value;
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t c = 0; c < cols; ++c) n.value.at(r0 + r, c) = m.at(r, c);
        n.parents.push_back(p.id);
        n.iaux.push_back(r0);
        r0 += m.rows();
    }
    return {push(std::move(n))};
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty part list");
    std::size_t cols = 0;
    const std::size_t rows = nodes_[parts[0].id].value.rows();
    for (Var p : parts) {
        const Matrix& m = nodes_[p.id].value;
        if (m.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
        cols += m.cols();
    }
    Node n;
    n.op = Op::ConcatCols;
    n.value = Matrix(rows, cols);
    std::size_t c0 = 0;
    for (Var p : parts) {
        const Matrix& m = nodes_[p.id].value;
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < m.cols(); ++c) n.value.at(r, c0 + c) = m.at(r, c);
        n.parents.push_back(p.id);
        n.iaux.push_back(c0);
        c0 += m.cols();
    }
    return {push(std::move(n))};
}

Var Tape::slice_rows(Var a, std::size_t start, std::size_t len) {
    const Matrix& m = nodes_[a.id].value;
    if (start + len > m.rows()) throw std::invalid_argument("slice_rows: range out of bounds");
    Node n;
    n.op = Op::SliceRows;
    n.value = Matrix(len, m.cols());
    for (std::size_t r = 0; r < len; ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) n.value.at(r, c) = m.at(start + r, c);
    n.parents = {a.id};
    n.iaux = {start, len};
    return {push(std::move(n))};
}

Var Tape::slice_cols(Var a, std::size_t start, std::size_t len) {
    const Matrix& m = nodes_[a.id].value;
    if (start + len > m.cols()) throw std::invalid_argument("slice_cols: range out of bounds");
    Node n;
    n.op = Op::SliceCols;
    n.value = Matrix(m.rows(), len);
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < len; ++c) n.value.at(r, c) = m.at(r, start + c);
    n.parents = {a.id};
    n.iaux = {start, len};
    return {push(std::move(n))};
}

Var Tape::gather_rows(Var a, std::vector<std::size_t> indices) {
    const Matrix& m = nodes_[a.id].value;
    Node n;
    n.op = Op::GatherRows;
    n.value = Matrix(indices.size(), m.cols());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= m.rows())
            throw std::invalid_argument("gather_rows: index out of bounds");
        for (std::size_t c = 0; c < m.cols(); ++c) n.value.at(r, c) = m.at(indices[r], c);
    }
    n.parents = {a.id};
    n.iaux = std::move(indices);
    return {push(std::move(n))};
}

Var Tape::mean_rows(Var a) {
    const Matrix& m = nodes_[a.id].value;
    Node n;
    n.op = Op::MeanRows;
    n.value = Matrix(1, m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) n.value.at(0, c) += m.at(r, c);
    n.value.scale_in_place(1.0 / static_cast<double>(m.rows()));
    n.parents = {a.id};
    return {push(std::move(n))};
}

Var Tape::sum_all(Var a) {
    const Matrix& m = nodes_[a.id].value;
    Node n;
    n.op = Op::SumAll;
    n.value = Matrix(1, 1);
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += m.data()[i];
    n.value.at(0, 0) = s;
    n.parents = {a.id};
    return {push(std::move(n))};
}

Var Tape::cross_entropy(Var logits, std::vector<int> targets, std::vector<int> mask) {
    const Matrix& z = nodes_[logits.id].value;
    if (targets.size() != z.rows() || mask.size() != z.rows())
        throw std::invalid_argument("cross_entropy: length mismatch, logits rows " +
                                    std::to_string(z.rows()) + " vs targets " +
                                    std::to_string(targets.size()));
    Node n;
    n.op = Op::CrossEntropy;
    n.aux = Matrix(z.rows(), z.cols());  // row-wise softmax, cached for backward
    double loss = 0.0;
    for (std::size_t r = 0; r < z.rows(); ++r) {
        const int t = targets[r];
        if (t < 0 || static_cast<std::size_t>(t) >= z.cols())
            throw std::invalid_argument("cross_entropy: target id out of range");
        double mx = -INFINITY;
        for (std::size_t c = 0; c < z.cols(); ++c) mx = std::max(mx, z.at(r, c));
        double sum = 0.0;
        for (std::size_t c = 0; c < z.cols(); ++c) {
            const double e = std::exp(z.at(r, c) - mx);
            n.aux.at(r, c) = e;
            sum += e;
        }
        for (std::size_t c = 0; c < z.cols(); ++c) n.aux.at(r, c) /= sum;
        if (mask[r] != 0) loss += (mx + std::log(sum)) - z.at(r, t);
    }
    n.value = Matrix(1, 1);
    n.value.at(0, 0) = loss;
    n.parents = {logits.id};
    n.iaux.reserve(2 * z.rows());
    for (int t : targets) n.iaux.push_back(static_cast<std::size_t>(t));
    for (int m : mask) n.iaux.push_back(static_cast<std::size_t>(m != 0));
    return {push(std::move(n))};
}

Matrix& Tape::grad_of(int id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
        n.grad = Matrix(n.value.rows(), n.value.cols(), 0.0);
        n.has_grad = true;
    }
    return n.grad;
}

void Tape::accumulate(int id, const Matrix& g) {
    grad_of(id).add_in_place(g);
}

void Tape::backward(Var out) {
    Node& on = nodes_[out.id];
    if (on.value.rows() != 1 || on.value.cols() != 1)
        throw std::invalid_argument("backward: output must be scalar, got " +
                                    on.value.shape_str());
    grad_of(out.id).at(0, 0) = 1.0;
    for (int id = out.id; id >= 0; --id) {
        if (!nodes_[id].has_grad) continue;
        backward_node(id);
    }
}

void Tape::backward_node(int id) {
    Node& n = nodes_[id];
    const Matrix& g = n.grad;
    switch (n.op) {
        case Op::Leaf:
            break;
        case Op::Param:
            if (n.param && n.param->trainable) n.param->grad.add_in_place(g);
            break;
        case Op::MatMul: {
            const Matrix& a = nodes_[n.parents[0]].value;
            const Matrix& b = nodes_[n.parents[1]].value;
            accumulate(n.parents[0], Matrix::multiply(g, b.transposed()));
            accumulate(n.parents[1], Matrix::multiply(a.transposed(), g));
            break;
        }
        case Op::Transpose:
            accumulate(n.parents[0], g.transposed());
            break;
        case Op::Add:
            accumulate(n.parents[0], g);
            accumulate(n.parents[1], g);
            break;
        case Op::Scale: {
            Matrix ga = g;
            ga.scale_in_place(n.scalar);
            accumulate(n.parents[0], ga);
            break;
        }
        case Op::AddRowVec: {
            accumulate(n.parents[0], g);
            Matrix gb(1, g.cols());
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < g.cols(); ++c) gb.at(0, c) += g.at(r, c);
            accumulate(n.parents[1], gb);
            break;
        }
        case Op::SoftmaxRows: {
            const Matrix& y = n.value;
            Matrix gx(y.rows(), y.cols());
            for (std::size_t r = 0; r < y.rows(); ++r) {
                double dot = 0.0;
                for (std::size_t c = 0; c < y.cols(); ++c) dot += g.at(r, c) * y.at(r, c);
                for (std::size_t c = 0; c < y.cols(); ++c)
                    gx.at(r, c) = y.at(r, c) * (g.at(r, c) - dot);
            }
            accumulate(n.parents[0], gx);
            break;
        }
        case Op::ColNormalize: {
            const Matrix& y = n.value;
            Matrix gx(y.rows(), y.cols());
            for (std::size_t c = 0; c < y.cols(); ++c) {
                const double s = n.aux.at(0, c);
                double dot = 0.0;
                for (std::size_t r = 0; r < y.rows(); ++r) dot += g.at(r, c) * y.at(r, c);
                for (std::size_t r = 0; r < y.rows(); ++r)
                    gx.at(r, c) = (g.at(r, c) - dot) / s;
            }
            accumulate(n.parents[0], gx);
            break;
        }
        case Op::LayerNorm: {
            const Matrix& x = nodes_[n.parents[0]].value;
            const Matrix& gm = nodes_[n.parents[1]].value;
            const std::size_t R = x.rows(), C = x.cols();
            Matrix gx(R, C), gg(1, C), gb(1, C);
            for (std::size_t r = 0; r < R; ++r) {
                const double mean = n.aux.at(r, 0);
                const double rstd = n.aux.at(r, 1);
                double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                for (std::size_t c = 0; c < C; ++c) {
                    const double xhat = (x.at(r, c) - mean) * rstd;
                    const double dy = g.at(r, c);
                    gg.at(0, c) += dy * xhat;
                    gb.at(0, c) += dy;
                    const double dxhat = dy * gm.at(0, c);
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat;
                }
                const double inv_c = 1.0 / static_cast<double>(C);
                for (std::size_t c = 0; c < C; ++c) {
                    const double xhat = (x.at(r, c) - mean) * rstd;
                    const double dxhat = g.at(r, c) * gm.at(0, c);
                    gx.at(r, c) =
                        rstd * (dxhat - inv_c * sum_dxhat - xhat * inv_c * sum_dxhat_xhat);
                }
            }
            accumulate(n.parents[0], gx);
            accumulate(n.parents[1], gg);
            accumulate(n.parents[2], gb);
            break;
        }
        case Op::Gelu: {
            const Matrix& x = nodes_[n.parents[0]].value;
            Matrix gx(x.rows(), x.cols());
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double v = x.data()[i];
                const double u = kGeluC * (v + kGeluA * v * v * v);
                const double t = std::tanh(u);
                const double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
                const double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
                gx.data()[i] = g.data()[i] * d;
            }
            accumulate(n.parents[0], gx);
            break;
        }
        case Op::MulElem: {
            const Matrix& a = nodes_[n.parents[0]].value;
            const Matrix& b = nodes_[n.parents[1]].value;
            Matrix ga(a.rows(), a.cols()), gb(a.rows(), a.cols());
            for (std::size_t i = 0; i < a.size(); ++i) {
                ga.data()[i] = g.data()[i] * b.data()[i];
                gb.data()[i] = g.data()[i] * a.data()[i];
            }
            accumulate(n.parents[0], ga);
            accumulate(n.parents[1], gb);
            break;
        }
        case Op::ConcatRows: {
            for (std::size_t p = 0; p < n.parents.size(); ++p) {
                const Matrix& part = nodes_[n.parents[p]].value;
                Matrix gp(part.rows(), part.cols());
                for (std::size_t r = 0; r < part.rows(); ++r)
                    for (std::size_t c = 0; c < part.cols(); ++c)
                        gp.at(r, c) = g.at(n.iaux[p] + r, c);
                accumulate(n.parents[p], gp);
            }
            break;
        }
        case Op::ConcatCols: {
            for (std::size_t p = 0; p < n.parents.size(); ++p) {
                const Matrix& part = nodes_[n.parents[p]].value;
                Matrix gp(part.rows(), part.cols());
                for (std::size_t r = 0; r < part.rows(); ++r)
                    for (std::size_t c = 0; c < part.cols(); ++c)
                        gp.at(r, c) = g.at(r, n.iaux[p] + c);
                accumulate(n.parents[p], gp);
            }
            break;
        }
        case Op::SliceRows: {
            const Matrix& src = nodes_[n.parents[0]].value;
            Matrix gp(src.rows(), src.cols());
            for (std::size_t r = 0; r < n.iaux[1]; ++r)
                for (std::size_t c = 0; c < src.cols(); ++c)
                    gp.at(n.iaux[0] + r, c) = g.at(r, c);
            accumulate(n.parents[0], gp);
            break;
        }
        case Op::SliceCols: {
            const Matrix& src = nodes_[n.parents[0]].value;
            Matrix gp(src.rows(), src.cols());
            for (std::size_t r = 0; r < src.rows(); ++r)
                for (std::size_t c = 0; c < n.iaux[1]; ++c)
                    gp.at(r, n.iaux[0] + c) = g.at(r, c);
            accumulate(n.parents[0], gp);
            break;
        }
        case Op::GatherRows: {
            const Matrix& src = nodes_[n.parents[0]].value;
            Matrix gp(src.rows(), src.cols());
            for (std::size_t r = 0; r < n.iaux.size(); ++r)
                for (std::size_t c = 0; c < src.cols(); ++c)
                    gp.at(n.iaux[r], c) += g.at(r, c);
            accumulate(n.parents[0], gp);
            break;
        }
        case Op::MeanRows: {
            const Matrix& src = nodes_[n.parents[0]].value;
            const double inv = 1.0 / static_cast<double>(src.rows());
            Matrix gp(src.rows(), src.cols());
            for (std::size_t r = 0; r < src.rows(); ++r)
                for (std::size_t c = 0; c < src.cols(); ++c) gp.at(r, c) = g.at(0, c) * inv;
            accumulate(n.parents[0], gp);
            break;
        }
        case Op::SumAll: {
            const Matrix& src = nodes_[n.parents[0]].value;
            Matrix gp(src.rows(), src.cols(), g.at(0, 0));
            accumulate(n.parents[0], gp);
            break;
        }
        case Op::CrossEntropy: {
            const Matrix& probs = n.aux;
            const std::size_t R = probs.rows(), C = probs.cols();
            const double gs = g.at(0, 0);
            Matrix gz(R, C);
            for (std::size_t r = 0; r < R; ++r) {
                if (n.iaux[R + r] == 0) continue;  // masked position
                const std::size_t t = n.iaux[r];
                for (std::size_t c = 0; c < C; ++c) gz.at(r, c) = gs * probs.at(r, c);
                gz.at(r, t) -= gs;
            }
            accumulate(n.parents[0], gz);
            break;
        }
    }
}

double value_and_grad(const std::function<Var(Tape&)>& f,
                      const std::vector<Parameter*>& params) {
    for (Parameter* p : params) p->zero_grad();
    Tape tape;
    Var out = f(tape);
    const Matrix& v = tape.value(out);
    if (v.rows() != 1 || v.cols() != 1)
        throw std::invalid_argument("value_and_grad: f must return a scalar, got " +
                                    v.shape_str());
    tape.backward(out);
    return v.at(0, 0);
}

double eval_scalar(const std::function<Var(Tape&)>& f) {
    Tape tape;
    Var out = f(tape);
    const Matrix& v = tape.value(out);
    if (v.rows() != 1 || v.cols() != 1)
        throw std::invalid_argument("eval_scalar: f must return a scalar, got " + v.shape_str());
    return v.at(0, 0);
}

std::vector<Matrix> finite_diff_grad(const std::function<Var(Tape&)>& f,
                                     const std::vector<Parameter*>& params, double h) {
    if (h <= 0.0) throw std::invalid_argument("finite_diff_grad: h must be positive");
    std::vector<Matrix> grads;
    grads.reserve(params.size());
    for (Parameter* p : params) {
        Matrix g(p->value.rows(), p->value.cols());
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double orig = p->value.data()[i];
            p->value.data()[i] = orig + h;
            const double fp = eval_scalar(f);
            p->value.data()[i] = orig - h;
            const double fm = eval_scalar(f);
            p->value.data()[i] = orig;
            g.data()[i] = (fp - fm) / (2.0 * h);
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

double max_relative_error(const Matrix& a, const Matrix& b, double floor) {
    if (!a.same_shape(b)) return INFINITY;
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a.data()[i], y = b.data()[i];
        const double denom = std::max({std::abs(x), std::abs(y), floor});
        worst = std::max(worst, std::abs(x - y) / denom);
    }
    return worst;
}

}  // namespace relcap
