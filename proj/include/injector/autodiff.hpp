#pragma once

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "injector/tensor.hpp"

namespace injector {

// A value in the computation graph. Parameters are long-lived Variables whose
// grad persists across a training step; intermediates are owned by the Tape
// that created them.
struct Variable {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_allocated = false;
    std::string name;

    bool has_grad() const { return grad_allocated; }
    Tensor& ensure_grad() {
        if (!grad_allocated) {
            grad = Tensor::zeros(value.shape());
            grad_allocated = true;
        }
        return grad;
    }
    void zero_grad() {
        if (grad_allocated) grad.zero();
    }
};

using Var = std::shared_ptr<Variable>;

Var make_variable(Tensor value, bool requires_grad = true, std::string name = "");
Var constant(Tensor value);

// Reverse-mode tape. Ops append backward closures in forward order; backward()
// runs them in reverse. One tape per training step, single-threaded.
class Tape {
public:
    Var track(Tensor value, bool requires_grad);
    void record(std::function<void()> step);
    // Seeds out's gradient with `seed` and propagates. Out must be scalar.
    void backward(const Var& out, double seed = 1.0);
    size_t node_count() const { return steps_.size(); }
    void clear();

private:
    std::vector<std::function<void()>> steps_;
    std::vector<Var> owned_;
};

enum class Activation { Gelu, Relu, Tanh, Identity };
Activation activation_from_string(const std::string& s);
std::string activation_to_string(Activation a);

// --- ops ----------------------------------------------------------------
// All ops validate shapes and register gradient rules on the tape.

// c = a*b with optional transposes on the stored operands.
Var matmul(Tape& tape, const Var& a, const Var& b, bool transpose_a = false,
           bool transpose_b = false);
// [m] x [n] -> [m x n]
Var outer(Tape& tape, const Var& u, const Var& v);
// [p x q] (x) [r x t] -> [p*r x q*t]
Var kron(Tape& tape, const Var& s, const Var& a);
Var add(Tape& tape, const Var& a, const Var& b);
// rows of x plus vector b (the only broadcast form supported)
Var add_bias(Tape& tape, const Var& x, const Var& b);
Var scale(Tape& tape, const Var& x, double alpha);
Var mul(Tape& tape, const Var& a, const Var& b);
Var tanh_op(Tape& tape, const Var& x);
Var relu(Tape& tape, const Var& x);
Var gelu(Tape& tape, const Var& x);
Var activate(Tape& tape, const Var& x, Activation act);
Var reshape(Tape& tape, const Var& x, Shape new_shape);
// Pointwise op with caller-supplied forward and derivative (df takes x and y).
Var apply_unary(Tape& tape, const Var& x, const std::function<double(double)>& f,
                const std::function<double(double, double)>& df);

Var softmax_rows(Tape& tape, const Var& x);
Var layer_norm(Tape& tape, const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
// rows of `table` selected by ids; gradient scatter-adds into table.
Var gather_rows(Tape& tape, const Var& table, const std::vector<int64_t>& ids);
Var take_row(Tape& tape, const Var& x, int64_t row);
Var concat_cols(Tape& tape, const std::vector<Var>& parts);
// Inverted dropout; rate 0 returns x unchanged.
Var dropout(Tape& tape, const Var& x, double rate, std::mt19937_64& rng);
// -log softmax(logits)[label]; logits is a vector or a single row.
Var cross_entropy(Tape& tape, const Var& logits, int64_t label);
Var sum_all(Tape& tape, const Var& x);

}  // namespace injector
