#include "injector/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "injector/errors.hpp"
#include "injector/kernels.hpp"

namespace injector {

namespace {
const kernels::KernelSet& K() { return kernels::active(); }

void check_matrix(const Var& v, const char* op) {
    if (!v->value.is_matrix()) {
        throw ShapeError(std::string(op) + " requires a matrix, got " + shape_str(v->value.shape()));
    }
}

void check_vector(const Var& v, const char* op) {
    if (!v->value.is_vector()) {
        throw ShapeError(std::string(op) + " requires a vector, got " + shape_str(v->value.shape()));
    }
}
}  // namespace

Var make_variable(Tensor value, bool requires_grad, std::string name) {
    auto v = std::make_shared<Variable>();
    v->value = std::move(value);
    v->requires_grad = requires_grad;
    v->name = std::move(name);
    return v;
}

Var constant(Tensor value) { return make_variable(std::move(value), false); }

Var Tape::track(Tensor value, bool requires_grad) {
    auto v = make_variable(std::move(value), requires_grad);
    owned_.push_back(v);
    return v;
}

void Tape::record(std::function<void()> step) { steps_.push_back(std::move(step)); }

void Tape::backward(const Var& out, double seed) {
    if (out->value.numel() != 1) {
        throw ContractError("backward requires a scalar output, got " +
                            shape_str(out->value.shape()));
    }
    out->ensure_grad()[0] += seed;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

void Tape::clear() {
    steps_.clear();
    owned_.clear();
}

Activation activation_from_string(const std::string& s) {
    if (s == "gelu") return Activation::Gelu;
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    if (s == "identity") return Activation::Identity;
    throw ConfigError("unknown activation '" + s + "'");
}

std::string activation_to_string(Activation a) {
    switch (a) {
        case Activation::Gelu: return "gelu";
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
    }
    return "gelu";
}

Var matmul(Tape& tape, const Var& a, const Var& b, bool transpose_a, bool transpose_b) {
    check_matrix(a, "matmul");
    check_matrix(b, "matmul");
    if (transpose_a && transpose_b) throw ShapeError("matmul: both operands transposed is unsupported");
    const int64_t m = transpose_a ? a->value.extent(1) : a->value.extent(0);
    const int64_t ka = transpose_a ? a->value.extent(0) : a->value.extent(1);
    const int64_t kb = transpose_b ? b->value.extent(1) : b->value.extent(0);
    const int64_t n = transpose_b ? b->value.extent(0) : b->value.extent(1);
    if (ka != kb) {
        throw ShapeError("matmul inner extents differ: " + shape_str(a->value.shape()) +
                         (transpose_a ? "^T" : "") + " x " + shape_str(b->value.shape()) +
                         (transpose_b ? "^T" : ""));
    }
    const int mi = static_cast<int>(m), ki = static_cast<int>(ka), ni = static_cast<int>(n);

    Tensor out({m, n});
    if (!transpose_a && !transpose_b) {
        K().matmul_nn(out.data(), a->value.data(), b->value.data(), mi, ki, ni);
    } else if (!transpose_a && transpose_b) {
        K().matmul_nt(out.data(), a->value.data(), b->value.data(), mi, ki, ni);
    } else {
        K().matmul_tn(out.data(), a->value.data(), b->value.data(), mi, ki, ni);
    }

    Var result = tape.track(std::move(out), a->requires_grad || b->requires_grad);
    if (result->requires_grad) {
        tape.record([a, b, result, transpose_a, transpose_b, mi, ki, ni] {
            if (!result->has_grad()) return;
            const double* dc = result->grad.data();
            if (!transpose_a && !transpose_b) {
                // dA += dC * B^T, dB += A^T * dC
                if (a->requires_grad)
                    K().matmul_nt(a->ensure_grad().data(), dc, b->value.data(), mi, ni, ki);
                if (b->requires_grad)
                    K().matmul_tn(b->ensure_grad().data(), a->value.data(), dc, ki, mi, ni);
            } else if (!transpose_a && transpose_b) {
                // C = A * B^T: dA += dC * B, dB += dC^T * A
                if (a->requires_grad)
                    K().matmul_nn(a->ensure_grad().data(), dc, b->value.data(), mi, ni, ki);
                if (b->requires_grad)
                    K().matmul_tn(b->ensure_grad().data(), dc, a->value.data(), ni, mi, ki);
            } else {
                // C = A^T * B with A stored [k x m]: dA += B * dC^T, dB += A * dC
                if (a->requires_grad)
                    K().matmul_nt(a->ensure_grad().data(), b->value.data(), dc, ki, ni, mi);
                if (b->requires_grad)
                    K().matmul_nn(b->ensure_grad().data(), a->value.data(), dc, ki, mi, ni);
            }
        });
    }
    return result;
}

Var outer(Tape& tape, const Var& u, const Var& v) {
    check_vector(u, "outer");
    check_vector(v, "outer");
    const int64_t m = u->value.numel();
    const int64_t n = v->value.numel();
    Tensor out({m, n});
    for (int64_t i = 0; i < m; ++i) {
        K().axpy(out.data() + i * n, v->value.data(), u->value[i], static_cast<int>(n));
    }
    Var result = tape.track(std::move(out), u->requires_grad || v->requires_grad);
    if (result->requires_grad) {
        tape.record([u, v, result, m, n] {
            if (!result->has_grad()) return;
            const double* dout = result->grad.data();
            if (u->requires_grad) {
                double* du = u->ensure_grad().data();
                for (int64_t i = 0; i < m; ++i) {
                    du[i] += K().dot(dout + i * n, v->value.data(), static_cast<int>(n));
                }
            }
            if (v->requires_grad) {
                double* dv = v->ensure_grad().data();
                for (int64_t i = 0; i < m; ++i) {
                    K().axpy(dv, dout + i * n, u->value[i], static_cast<int>(n));
                }
            }
        });
    }
    return result;
}

Var kron(Tape& tape, const Var& s, const Var& a) {
    check_matrix(s, "kron");
    check_matrix(a, "kron");
    const int64_t p = s->value.extent(0), q = s->value.extent(1);
    const int64_t r = a->value.extent(0), t = a->value.extent(1);
    Tensor out({p * r, q * t});
    for (int64_t i = 0; i < p; ++i) {
        for (int64_t j = 0; j < q; ++j) {
            const double sv = s->value.at(i, j);
            for (int64_t k = 0; k < r; ++k) {
                double* orow = out.data() + (i * r + k) * (q * t) + j * t;
                K().axpy(orow, a->value.data() + k * t, sv, static_cast<int>(t));
            }
        }
    }
    Var result = tape.track(std::move(out), s->requires_grad || a->requires_grad);
    if (result->requires_grad) {
        tape.record([s, a, result, p, q, r, t] {
            if (!result->has_grad()) return;
            const Tensor& dout = result->grad;
            for (int64_t i = 0; i < p; ++i) {
                for (int64_t j = 0; j < q; ++j) {
                    double ds_acc = 0.0;
                    for (int64_t k = 0; k < r; ++k) {
                        const double* drow = dout.data() + (i * r + k) * (q * t) + j * t;
                        if (a->requires_grad) {
                            K().axpy(a->ensure_grad().data() + k * t, drow, s->value.at(i, j),
                                     static_cast<int>(t));
                        }
                        if (s->requires_grad) {
                            ds_acc += K().dot(drow, a->value.data() + k * t, static_cast<int>(t));
                        }
                    }
                    if (s->requires_grad) s->ensure_grad().at(i, j) += ds_acc;
                }
            }
        });
    }
    return result;
}

Var add(Tape& tape, const Var& a, const Var& b) {
    if (!a->value.same_shape(b->value)) {
        throw ShapeError("add shapes differ: " + shape_str(a->value.shape()) + " vs " +
                         shape_str(b->value.shape()));
    }
    Tensor out(a->value.shape());
    K().add(out.data(), a->value.data(), b->value.data(), static_cast<int>(out.numel()));
    Var result = tape.track(std::move(out), a->requires_grad || b->requires_grad);
    if (result->requires_grad) {
        tape.record([a, b, result] {
            if (!result->has_grad()) return;
            const int n = static_cast<int>(result->grad.numel());
            if (a->requires_grad) K().axpy(a->ensure_grad().data(), result->grad.data(), 1.0, n);
            if (b->requires_grad) K().axpy(b->ensure_grad().data(), result->grad.data(), 1.0, n);
        });
    }
    return result;
}

Var add_bias(Tape& tape, const Var& x, const Var& b) {
    check_vector(b, "add_bias");
    const int64_t cols = x->value.cols();
    if (cols != b->value.numel()) {
        throw ShapeError("add_bias: " + shape_str(x->value.shape()) + " rows vs bias " +
                         shape_str(b->value.shape()));
    }
    const int64_t rows = x->value.rows();
    Tensor out(x->value.shape());
    for (int64_t i = 0; i < rows; ++i) {
        K().add(out.data() + i * cols, x->value.data() + i * cols, b->value.data(),
                static_cast<int>(cols));
    }
    Var result = tape.track(std::move(out), x->requires_grad || b->requires_grad);
    if (result->requires_grad) {
        tape.record([x, b, result, rows, cols] {
            if (!result->has_grad()) return;
            if (x->requires_grad) {
                K().axpy(x->ensure_grad().data(), result->grad.data(), 1.0,
                         static_cast<int>(rows * cols));
            }
            if (b->requires_grad) {
                double* db = b->ensure_grad().data();
                for (int64_t i = 0; i < rows; ++i) {
                    K().axpy(db, result->grad.data() + i * cols, 1.0, static_cast<int>(cols));
                }
            }
        });
    }
    return result;
}

Var scale(Tape& tape, const Var& x, double alpha) {
    Tensor out(x->value.shape());
    K().scale(out.data(), x->value.data(), alpha, static_cast<int>(out.numel()));
    Var result = tape.track(std::move(out), x->requires_grad);
    if (result->requires_grad) {
        tape.record([x, result, alpha] {
            if (!result->has_grad()) return;
            K().axpy(x->ensure_grad().data(), result->grad.data(), alpha,
                     static_cast<int>(result->grad.numel()));
        });
    }
    return result;
}

Var mul(Tape& tape, const Var& a, const Var& b) {
    if (!a->value.same_shape(b->value)) {
        throw ShapeError("mul shapes differ: " + shape_str(a->value.shape()) + " vs " +
                         shape_str(b->value.shape()));
    }
    Tensor out(a->value.shape());
    K().mul(out.data(), a->value.data(), b->value.data(), static_cast<int>(out.numel()));
    Var result = tape.track(std::move(out), a->requires_grad || b->requires_grad);
    if (result->requires_grad) {
        tape.record([a, b, result] {
            if (!result->has_grad()) return;
            const int64_t n = result->grad.numel();
            if (a->requires_grad) {
                double* da = a->ensure_grad().data();
                for (int64_t i = 0; i < n; ++i) da[i] += result->grad[i] * b->value[i];
            }
            if (b->requires_grad) {
                double* db = b->ensure_grad().data();
                for (int64_t i = 0; i < n; ++i) db[i] += result->grad[i] * a->value[i];
            }
        });
    }
    return result;
}

Var tanh_op(Tape& tape, const Var& x) {
    Tensor out(x->value.shape());
    K().tanh_fwd(out.data(), x->value.data(), static_cast<int>(out.numel()));
    Var result = tape.track(std::move(out), x->requires_grad);
    if (result->requires_grad) {
        tape.record([x, result] {
            if (!result->has_grad()) return;
            K().tanh_bwd(x->ensure_grad().data(), result->grad.data(), result->value.data(),
                         static_cast<int>(result->grad.numel()));
        });
    }
    return result;
}

Var relu(Tape& tape, const Var& x) {
    Tensor out(x->value.shape());
    K().relu_fwd(out.data(), x->value.data(), static_cast<int>(out.numel()));
    Var result = tape.track(std::move(out), x->requires_grad);
    if (result->requires_grad) {
        tape.record([x, result] {
            if (!result->has_grad()) return;
            K().relu_bwd(x->ensure_grad().data(), result->grad.data(), x->value.data(),
                         static_cast<int>(result->grad.numel()));
        });
    }
    return result;
}

Var gelu(Tape& tape, const Var& x) {
    Tensor out(x->value.shape());
    K().gelu_fwd(out.data(), x->value.data(), static_cast<int>(out.numel()));
    Var result = tape.track(std::move(out), x->requires_grad);
    if (result->requires_grad) {
        tape.record([x, result] {
            if (!result->has_grad()) return;
            K().gelu_bwd(x->ensure_grad().data(), result->grad.data(), x->value.data(),
                         static_cast<int>(result->grad.numel()));
        });
    }
    return result;
}

Var activate(Tape& tape, const Var& x, Activation act) {
    switch (act) {
        case Activation::Gelu: return gelu(tape, x);
        case Activation::Relu: return relu(tape, x);
        case Activation::Tanh: return tanh_op(tape, x);
        case Activation::Identity: return x;
    }
    return x;
}

Var reshape(Tape& tape, const Var& x, Shape new_shape) {
    Tensor out = x->value.reshaped(std::move(new_shape));
    Var result = tape.track(std::move(out), x->requires_grad);
    if (result->requires_grad) {
        tape.record([x, result] {
            if (!result->has_grad()) return;
            K().axpy(x->ensure_grad().data(), result->grad.data(), 1.0,
                     static_cast<int>(result->grad.numel()));
        });
    }
    return result;
}

Var apply_unary(Tape& tape, const Var& x, const std::function<double(double)>& f,
                const std::function<double(double, double)>& df) {
    Tensor out(x->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = f(x->value[i]);
    Var result = tape.track(std::move(out), x->requires_grad);
    if (result->requires_grad) {
        tape.record([x, result, df] {
            if (!result->has_grad()) return;
            double* dx = x->ensure_grad().data();
            for (int64_t i = 0; i < result->grad.numel(); ++i) {
                dx[i] += result->grad[i] * df(x->value[i], result->value[i]);
            }
        });
    }
    return result;
}

Var softmax_rows(Tape& tape, const Var& x) {
    check_matrix(x, "softmax_rows");
    const int64_t rows = x->value.extent(0), cols = x->value.extent(1);
    Tensor out(x->value.shape());
    for (int64_t i = 0; i < rows; ++i) {
        const double* xi = x->value.data() + i * cols;
        double* oi = out.data() + i * cols;
        double mx = xi[0];
        for (int64_t j = 1; j < cols; ++j) mx = std::max(mx, xi[j]);
        double z = 0.0;
        for (int64_t j = 0; j < cols; ++j) {
            oi[j] = std::exp(xi[j] - mx);
            z += oi[j];
        }
        for (int64_t j = 0; j < cols; ++j) oi[j] /= z;
    }
    Var result = tape.track(std::move(out), x->requires_grad);
    if (result->requires_grad) {
        tape.record([x, result, rows, cols] {
            if (!result->has_grad()) return;
            double* dx = x->ensure_grad().data();
            for (int64_t i = 0; i < rows; ++i) {
                const double* yi = result->value.data() + i * cols;
                const double* dyi = result->grad.data() + i * cols;
                const double inner = K().dot(dyi, yi, static_cast<int>(cols));
                for (int64_t j = 0; j < cols; ++j) dx[i * cols + j] += yi[j] * (dyi[j] - inner);
            }
        });
    }
    return result;
}

Var layer_norm(Tape& tape, const Var& x, const Var& gamma, const Var& beta, double eps) {
    check_matrix(x, "layer_norm");
    check_vector(gamma, "layer_norm");
    check_vector(beta, "layer_norm");
    const int64_t rows = x->value.extent(0), cols = x->value.extent(1);
    if (gamma->value.numel() != cols || beta->value.numel() != cols) {
        throw ShapeError("layer_norm parameter width mismatch: x " + shape_str(x->value.shape()) +
                         " gamma " + shape_str(gamma->value.shape()));
    }
    Tensor out(x->value.shape());
    Tensor xhat(x->value.shape());
    Tensor inv_std({rows});
    for (int64_t i = 0; i < rows; ++i) {
        const double* xi = x->value.data() + i * cols;
        double mean = K().sum(xi, static_cast<int>(cols)) / static_cast<double>(cols);
        double var = 0.0;
        for (int64_t j = 0; j < cols; ++j) var += (xi[j] - mean) * (xi[j] - mean);
        var /= static_cast<double>(cols);
        const double istd = 1.0 / std::sqrt(var + eps);
        inv_std[i] = istd;
        for (int64_t j = 0; j < cols; ++j) {
            const double h = (xi[j] - mean) * istd;
            xhat.at(i, j) = h;
            out.at(i, j) = gamma->value[j] * h + beta->value[j];
        }
    }
    Var result =
        tape.track(std::move(out), x->requires_grad || gamma->requires_grad || beta->requires_grad);
    if (result->requires_grad) {
        auto xhat_p = std::make_shared<Tensor>(std::move(xhat));
        auto istd_p = std::make_shared<Tensor>(std::move(inv_std));
        tape.record([x, gamma, beta, result, xhat_p, istd_p, rows, cols] {
            if (!result->has_grad()) return;
            const Tensor& dy = result->grad;
            for (int64_t i = 0; i < rows; ++i) {
                const double* dyi = dy.data() + i * cols;
                const double* hi = xhat_p->data() + i * cols;
                if (gamma->requires_grad) {
                    double* dg = gamma->ensure_grad().data();
                    for (int64_t j = 0; j < cols; ++j) dg[j] += dyi[j] * hi[j];
                }
                if (beta->requires_grad) {
                    K().axpy(beta->ensure_grad().data(), dyi, 1.0, static_cast<int>(cols));
                }
                if (x->requires_grad) {
                    double mean_dh = 0.0, mean_dh_h = 0.0;
                    for (int64_t j = 0; j < cols; ++j) {
                        const double dh = dyi[j] * gamma->value[j];
                        mean_dh += dh;
                        mean_dh_h += dh * hi[j];
                    }
                    mean_dh /= static_cast<double>(cols);
                    mean_dh_h /= static_cast<double>(cols);
                    double* dx = x->ensure_grad().data() + i * cols;
                    const double istd = (*istd_p)[i];
                    for (int64_t j = 0; j < cols; ++j) {
                        const double dh = dyi[j] * gamma->value[j];
                        dx[j] += istd * (dh - mean_dh - hi[j] * mean_dh_h);
                    }
                }
            }
        });
    }
    return result;
}

Var gather_rows(Tape& tape, const Var& table, const std::vector<int64_t>& ids) {
    check_matrix(table, "gather_rows");
    const int64_t vocab = table->value.extent(0), width = table->value.extent(1);
    for (int64_t id : ids) {
        if (id < 0 || id >= vocab) {
            throw VocabularyError("gather_rows: id " + std::to_string(id) + " out of range [0," +
                                  std::to_string(vocab) + ")");
        }
    }
    const int64_t k = static_cast<int64_t>(ids.size());
    Tensor out({std::max<int64_t>(k, 1), width});
    if (k == 0) throw ShapeError("gather_rows: empty id list");
    for (int64_t i = 0; i < k; ++i) {
        const double* src = table->value.data() + ids[static_cast<size_t>(i)] * width;
        std::copy(src, src + width, out.data() + i * width);
    }
    Var result = tape.track(std::move(out), table->requires_grad);
    if (result->requires_grad) {
        tape.record([table, result, ids, width] {
            if (!result->has_grad()) return;
            double* dt = table->ensure_grad().data();
            for (size_t i = 0; i < ids.size(); ++i) {
                K().axpy(dt + ids[i] * width, result->grad.data() + static_cast<int64_t>(i) * width,
                         1.0, static_cast<int>(width));
            }
        });
    }
    return result;
}

Var take_row(Tape& tape, const Var& x, int64_t row) {
    check_matrix(x, "take_row");
    const int64_t rows = x->value.extent(0), cols = x->value.extent(1);
    if (row < 0 || row >= rows) {
        throw ShapeError("take_row: row " + std::to_string(row) + " out of " + std::to_string(rows));
    }
    Tensor out({1, cols});
    std::copy(x->value.data() + row * cols, x->value.data() + (row + 1) * cols, out.data());
    Var result = tape.track(std::move(out), x->requires_grad);
    if (result->requires_grad) {
        tape.record([x, result, row, cols] {
            if (!result->has_grad()) return;
            K().axpy(x->ensure_grad().data() + row * cols, result->grad.data(), 1.0,
                     static_cast<int>(cols));
        });
    }
    return result;
}

Var concat_cols(Tape& tape, const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const int64_t rows = parts[0]->value.rows();
    int64_t total = 0;
    bool needs_grad = false;
    for (const Var& p : parts) {
        check_matrix(p, "concat_cols");
        if (p->value.extent(0) != rows) {
            throw ShapeError("concat_cols row mismatch: " + shape_str(p->value.shape()));
        }
        total += p->value.extent(1);
        needs_grad = needs_grad || p->requires_grad;
    }
    Tensor out({rows, total});
    int64_t off = 0;
    for (const Var& p : parts) {
        const int64_t w = p->value.extent(1);
        for (int64_t i = 0; i < rows; ++i) {
            std::copy(p->value.data() + i * w, p->value.data() + (i + 1) * w,
                      out.data() + i * total + off);
        }
        off += w;
    }
    Var result = tape.track(std::move(out), needs_grad);
    if (needs_grad) {
        tape.record([parts, result, rows, total] {
            if (!result->has_grad()) return;
            int64_t off = 0;
            for (const Var& p : parts) {
                const int64_t w = p->value.extent(1);
                if (p->requires_grad) {
                    double* dp = p->ensure_grad().data();
                    for (int64_t i = 0; i < rows; ++i) {
                        K().axpy(dp + i * w, result->grad.data() + i * total + off, 1.0,
                                 static_cast<int>(w));
                    }
                }
                off += w;
            }
        });
    }
    return result;
}

Var dropout(Tape& tape, const Var& x, double rate, std::mt19937_64& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must be in [0,1)");
    if (rate == 0.0) return x;
    const double keep = 1.0 - rate;
    const double inv_keep = 1.0 / keep;
    std::bernoulli_distribution coin(keep);
    auto mask = std::make_shared<Tensor>(x->value.shape());
    Tensor out(x->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) {
        const double m = coin(rng) ? inv_keep : 0.0;
        (*mask)[i] = m;
        out[i] = x->value[i] * m;
    }
    Var result = tape.track(std::move(out), x->requires_grad);
    if (result->requires_grad) {
        tape.record([x, result, mask] {
            if (!result->has_grad()) return;
            double* dx = x->ensure_grad().data();
            for (int64_t i = 0; i < result->grad.numel(); ++i) dx[i] += result->grad[i] * (*mask)[i];
        });
    }
    return result;
}

Var cross_entropy(Tape& tape, const Var& logits, int64_t label) {
    const Tensor& lv = logits->value;
    const bool row_form = lv.is_matrix() && lv.extent(0) == 1;
    if (!lv.is_vector() && !row_form) {
        throw ShapeError("cross_entropy expects a vector or single-row logits, got " +
                         shape_str(lv.shape()));
    }
    const int64_t n = lv.numel();
    if (label < 0 || label >= n) {
        throw VocabularyError("cross_entropy: label " + std::to_string(label) + " out of range [0," +
                              std::to_string(n) + ")");
    }
    double mx = lv[0];
    for (int64_t j = 1; j < n; ++j) mx = std::max(mx, lv[j]);
    double z = 0.0;
    for (int64_t j = 0; j < n; ++j) z += std::exp(lv[j] - mx);
    const double lse = mx + std::log(z);
    Tensor out({1});
    out[0] = lse - lv[label];
    Var result = tape.track(std::move(out), logits->requires_grad);
    if (result->requires_grad) {
        auto probs = std::make_shared<std::vector<double>>(static_cast<size_t>(n));
        for (int64_t j = 0; j < n; ++j) (*probs)[static_cast<size_t>(j)] = std::exp(lv[j] - lse);
        tape.record([logits, result, probs, label, n] {
            if (!result->has_grad()) return;
            const double seed = result->grad[0];
            double* dl = logits->ensure_grad().data();
            for (int64_t j = 0; j < n; ++j) dl[j] += seed * (*probs)[static_cast<size_t>(j)];
            dl[label] -= seed;
        });
    }
    return result;
}

Var sum_all(Tape& tape, const Var& x) {
    Tensor out({1});
    out[0] = K().sum(x->value.data(), static_cast<int>(x->value.numel()));
    Var result = tape.track(std::move(out), x->requires_grad);
    if (result->requires_grad) {
        tape.record([x, result] {
            if (!result->has_grad()) return;
            const double seed = result->grad[0];
            double* dx = x->ensure_grad().data();
            for (int64_t i = 0; i < x->value.numel(); ++i) dx[i] += seed;
        });
    }
    return result;
}

}  // namespace injector
