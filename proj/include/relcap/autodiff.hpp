#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "relcap/matrix.hpp"

namespace relcap {

// A named tensor. `grad` always matches `value` in shape and is all-zero
// after zero_grad(). Frozen tensors carry trainable=false and never receive
// gradient; they enter tape computations as plain leaves.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;
    bool trainable = true;

    Parameter() = default;
    Parameter(std::string n, Matrix v, bool train = true)
        : name(std::move(n)), value(std::move(v)),
          grad(value.rows(), value.cols(), 0.0), trainable(train) {}

    void zero_grad() { grad.fill(0.0); }
};

// Handle to a node on a Tape.
struct Var {
    int id = -1;
};

// Reverse-mode tape. Forward calls append nodes; backward() replays them in
// reverse, accumulating into node grads and finally into Parameter::grad for
// every registered trainable leaf. Replay order is the append order, so two
// identical forward passes produce bitwise-identical gradients.
class Tape {
public:
    // Leaves.
    Var leaf(Matrix m);                  // constant, no gradient tracked back
    Var param(Parameter& p);             // trainable leaf, grads land in p.grad

    // Primitives. Each is differentiable through backward().
    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var add(Var a, Var b);               // same shape
    Var scale(Var a, double s);
    Var add_row_broadcast(Var a, Var bias);  // bias is 1 x cols, added to every row
    Var softmax_rows(Var a);             // max-subtracted, rows sum to 1
    Var col_normalize(Var a);            // each column divided by its sum
    Var layer_norm(Var a, Var gamma, Var beta, double eps);
    Var gelu(Var a);                     // tanh approximation
    Var mul_elem(Var a, Var b);
    Var concat_rows(const std::vector<Var>& parts);
    Var concat_cols(const std::vector<Var>& parts);
    Var slice_rows(Var a, std::size_t start, std::size_t len);
    Var slice_cols(Var a, std::size_t start, std::size_t len);
    Var gather_rows(Var a, std::vector<std::size_t> indices);
    Var mean_rows(Var a);                // 1 x cols
    Var sum_all(Var a);                  // 1 x 1
    // Summed token-level cross entropy from logits. mask[i] == 0 drops row i.
    // targets.size() == logits.rows(); value is the Eq-style sum of -log p.
    Var cross_entropy(Var logits, std::vector<int> targets, std::vector<int> mask);

    const Matrix& value(Var v) const { return nodes_[v.id].value; }
    std::size_t num_nodes() const { return nodes_.size(); }

    // Seeds d(out)/d(out) = 1 and accumulates into every trainable leaf's
    // Parameter::grad. `out` must be 1x1.
    void backward(Var out);

private:
    enum class Op : std::uint8_t {
        Leaf, Param, MatMul, Transpose, Add, Scale, AddRowVec, SoftmaxRows,
        ColNormalize, LayerNorm, Gelu, MulElem, ConcatRows, ConcatCols,
        SliceRows, SliceCols, GatherRows, MeanRows, SumAll, CrossEntropy,
    };

    struct Node {
        Op op;
        Matrix value;
        std::vector<int> parents;
        std::vector<std::size_t> iaux;  // indices / slice offsets / targets+mask
        Matrix aux;                     // op-specific cache (LN stats, CE probs)
        double scalar = 0.0;
        Parameter* param = nullptr;
        bool has_grad = false;
        Matrix grad;
    };

    int push(Node n);
    Matrix& grad_of(int id);
    void accumulate(int id, const Matrix& g);
    void backward_node(int id);

    std::vector<Node> nodes_;
};

// Runs f on a fresh tape, checks the output is scalar, backpropagates, and
// returns the value. Gradients are left in params (zeroed first).
double value_and_grad(const std::function<Var(Tape&)>& f, const std::vector<Parameter*>& params);

// Forward-only evaluation of the same callable.
double eval_scalar(const std::function<Var(Tape&)>& f);

// Central differences (f(p+h) - f(p-h)) / 2h per coordinate, one Matrix of
// the parameter's shape per entry of params.
std::vector<Matrix> finite_diff_grad(const std::function<Var(Tape&)>& f,
                                     const std::vector<Parameter*>& params, double h = 1e-5);

// Max over coordinates of |a-b| / max(|a|, |b|, floor). The gradient-check
// metric used throughout the tests.
double max_relative_error(const Matrix& a, const Matrix& b, double floor = 1e-8);

}  // namespace relcap
