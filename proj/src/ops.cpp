#include "vqlatent/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vqlatent/errors.hpp"

namespace vql::ad {

namespace {

template <typename T>
using Backward = std::function<void(Node<T>&)>;

template <typename T>
bool recording(std::initializer_list<const Tensor<T>*> inputs) {
  if (!grad_enabled()) return false;
  for (const Tensor<T>* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, std::initializer_list<const Tensor<T>*> inputs,
                      Backward<T> backward) {
  Tensor<T> out(std::move(shape), std::move(data));
  if (recording(inputs)) {
    auto& node = *out.node();
    node.requires_grad = true;
    for (const Tensor<T>* t : inputs) node.parents.push_back(t->node());
    node.backward = std::move(backward);
  }
  return out;
}

// Gradient buffer of a parent, or nullptr when it does not take gradients.
template <typename T>
T* parent_grad(Node<T>& n, std::size_t i) {
  Node<T>& p = *n.parents[i];
  return p.requires_grad ? p.grad.data() : nullptr;
}

template <typename T>
void require_matrix(const Tensor<T>& x, const char* op) {
  if (x.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(x.shape()));
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner dimensions disagree for " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> c(m * n, T(0));
  const T* A = a.data().data();
  const T* B = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = A[i * k + p];
      const T* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return make_result<T>({m, n}, std::move(c), {&a, &b}, [m, k, n](Node<T>& o) {
    const T* A = o.parents[0]->data.data();
    const T* B = o.parents[1]->data.data();
    const T* G = o.grad.data();
    if (T* gA = parent_grad(o, 0)) {
      for (std::size_t i = 0; i < m; ++i) {
        const T* grow = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const T* brow = B + p * n;
          T acc = 0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          gA[i * k + p] += acc;
        }
      }
    }
    if (T* gB = parent_grad(o, 1)) {
      for (std::size_t i = 0; i < m; ++i) {
        const T* grow = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const T av = A[i * k + p];
          T* gbrow = gB + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  require_matrix(x, "transpose");
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<T> out(r * c);
  const auto d = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = d[i * c + j];
  return make_result<T>({c, r}, std::move(out), {&x}, [r, c](Node<T>& o) {
    T* g = parent_grad(o, 0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += o.grad[j * r + i];
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  const auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + db[i];
  return make_result<T>(a.shape(), std::move(out), {&a, &b}, [](Node<T>& o) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (T* g = parent_grad(o, p))
        for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  std::vector<T> out(a.numel());
  const auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] - db[i];
  return make_result<T>(a.shape(), std::move(out), {&a, &b}, [](Node<T>& o) {
    if (T* g = parent_grad(o, 0))
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    if (T* g = parent_grad(o, 1))
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] -= o.grad[i];
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  const auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * db[i];
  return make_result<T>(a.shape(), std::move(out), {&a, &b}, [](Node<T>& o) {
    const auto& va = o.parents[0]->data;
    const auto& vb = o.parents[1]->data;
    if (T* g = parent_grad(o, 0))
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * vb[i];
    if (T* g = parent_grad(o, 1))
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * va[i];
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (T& v : out) v *= factor;
  return make_result<T>(x.shape(), std::move(out), {&x}, [factor](Node<T>& o) {
    T* g = parent_grad(o, 0);
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * factor;
  });
}

template <typename T>
Tensor<T> add_row(const Tensor<T>& x, const Tensor<T>& bias) {
  require_matrix(x, "add_row");
  const std::size_t r = x.dim(0), c = x.dim(1);
  if (bias.numel() != c) {
    throw ShapeError("add_row: bias " + shape_str(bias.shape()) + " does not match " + shape_str(x.shape()));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  const auto b = bias.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += b[j];
  return make_result<T>(x.shape(), std::move(out), {&x, &bias}, [r, c](Node<T>& o) {
    if (T* g = parent_grad(o, 0))
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    if (T* g = parent_grad(o, 1))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[j] += o.grad[i * c + j];
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (T& v : out) v = v > T(0) ? v : T(0);
  return make_result<T>(x.shape(), std::move(out), {&x}, [](Node<T>& o) {
    T* g = parent_grad(o, 0);
    const auto& in = o.parents[0]->data;
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      if (in[i] > T(0)) g[i] += o.grad[i];
  });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  const Shape& s = x.shape();
  if (axis >= s.size()) throw ShapeError("softmax: axis " + std::to_string(axis) + " invalid for " + shape_str(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  const auto in = x.data();
  std::vector<T> out(in.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t q = 0; q < inner; ++q) {
      const std::size_t base = o * len * inner + q;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t i = 0; i < len; ++i) {
        const T v = in[base + i * inner];
        if (std::isnan(v)) throw NumericError("softmax: NaN input");
        mx = std::max(mx, v);
      }
      T z = 0;
      for (std::size_t i = 0; i < len; ++i) {
        const T e = std::exp(in[base + i * inner] - mx);
        out[base + i * inner] = e;
        z += e;
      }
      for (std::size_t i = 0; i < len; ++i) out[base + i * inner] /= z;
    }
  }
  return make_result<T>(s, std::move(out), {&x}, [outer, inner, len](Node<T>& o) {
    T* g = parent_grad(o, 0);
    const auto& y = o.data;
    for (std::size_t a = 0; a < outer; ++a) {
      for (std::size_t q = 0; q < inner; ++q) {
        const std::size_t base = a * len * inner + q;
        T dot = 0;
        for (std::size_t i = 0; i < len; ++i) dot += o.grad[base + i * inner] * y[base + i * inner];
        for (std::size_t i = 0; i < len; ++i) {
          const std::size_t idx = base + i * inner;
          g[idx] += y[idx] * (o.grad[idx] - dot);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.numel() / width;
  if (gamma.numel() != width) {
    throw ShapeError("layer_norm: gamma " + shape_str(gamma.shape()) + " does not match " + shape_str(x.shape()));
  }
  const bool has_beta = beta.defined();
  if (has_beta && beta.numel() != width) {
    throw ShapeError("layer_norm: beta " + shape_str(beta.shape()) + " does not match " + shape_str(x.shape()));
  }
  const auto in = x.data();
  const auto gm = gamma.data();
  std::vector<T> out(in.size());
  std::vector<T> xhat(in.size());
  std::vector<T> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = in.data() + r * width;
    T mu = 0;
    for (std::size_t j = 0; j < width; ++j) mu += row[j];
    mu /= T(width);
    T var = 0;
    for (std::size_t j = 0; j < width; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= T(width);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < width; ++j) {
      const T h = (row[j] - mu) * is;
      xhat[r * width + j] = h;
      out[r * width + j] = h * gm[j] + (has_beta ? beta.data()[j] : T(0));
    }
  }
  auto bw = [rows, width, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& o) {
    const auto& gm = o.parents[1]->data;
    T* gx = parent_grad(o, 0);
    T* gg = parent_grad(o, 1);
    T* gb = o.parents.size() > 2 ? parent_grad(o, 2) : nullptr;
    std::vector<T> dxhat(width);
    for (std::size_t r = 0; r < rows; ++r) {
      const T* dy = o.grad.data() + r * width;
      const T* h = xhat.data() + r * width;
      T mean_d = 0, mean_dh = 0;
      for (std::size_t j = 0; j < width; ++j) {
        if (gg) gg[j] += dy[j] * h[j];
        if (gb) gb[j] += dy[j];
        dxhat[j] = dy[j] * gm[j];
        mean_d += dxhat[j];
        mean_dh += dxhat[j] * h[j];
      }
      if (!gx) continue;
      mean_d /= T(width);
      mean_dh /= T(width);
      for (std::size_t j = 0; j < width; ++j) gx[r * width + j] += inv_std[r] * (dxhat[j] - mean_d - h[j] * mean_dh);
    }
  };
  if (has_beta) return make_result<T>(x.shape(), std::move(out), {&x, &gamma, &beta}, std::move(bw));
  return make_result<T>(x.shape(), std::move(out), {&x, &gamma}, std::move(bw));
}

template <typename T>
Tensor<T> embedding(const Tensor<T>& table, std::span<const std::int32_t> ids) {
  require_matrix(table, "embedding");
  const std::size_t rows = table.dim(0), width = table.dim(1);
  if (ids.empty()) throw InputError("embedding: empty id sequence");
  std::vector<std::int32_t> idv(ids.begin(), ids.end());
  std::vector<T> out(ids.size() * width);
  const auto d = table.data();
  for (std::size_t i = 0; i < idv.size(); ++i) {
    if (idv[i] < 0 || static_cast<std::size_t>(idv[i]) >= rows) {
      throw InputError("embedding: id " + std::to_string(idv[i]) + " outside table of " + std::to_string(rows));
    }
    std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(idv[i] * width), width, out.begin() + i * width);
  }
  return make_result<T>({idv.size(), width}, std::move(out), {&table}, [idv, width](Node<T>& o) {
    T* g = parent_grad(o, 0);
    for (std::size_t i = 0; i < idv.size(); ++i) {
      T* dst = g + static_cast<std::size_t>(idv[i]) * width;
      for (std::size_t j = 0; j < width; ++j) dst[j] += o.grad[i * width + j];
    }
  });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::int32_t> targets) {
  require_matrix(logits, "cross_entropy");
  const std::size_t n = logits.dim(0), v = logits.dim(1);
  if (targets.size() != n) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                     shape_str(logits.shape()));
  }
  const auto in = logits.data();
  std::vector<T> probs(n * v);
  T loss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= v) {
      throw InputError("cross_entropy: target " + std::to_string(targets[i]) + " outside vocabulary");
    }
    const T* row = in.data() + i * v;
    const T mx = *std::max_element(row, row + v);
    T z = 0;
    for (std::size_t j = 0; j < v; ++j) {
      probs[i * v + j] = std::exp(row[j] - mx);
      z += probs[i * v + j];
    }
    for (std::size_t j = 0; j < v; ++j) probs[i * v + j] /= z;
    loss += std::log(z) + mx - row[targets[i]];
  }
  loss /= T(n);
  std::vector<std::int32_t> tv(targets.begin(), targets.end());
  return make_result<T>({1}, {loss}, {&logits}, [n, v, tv, probs = std::move(probs)](Node<T>& o) {
    T* g = parent_grad(o, 0);
    const T s = o.grad[0] / T(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < v; ++j) g[i * v + j] += s * probs[i * v + j];
      g[i * v + static_cast<std::size_t>(tv[i])] -= s;
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  return make_result<T>({1}, {acc}, {&x}, [](Node<T>& o) {
    T* g = parent_grad(o, 0);
    const std::size_t n = o.parents[0]->data.size();
    for (std::size_t i = 0; i < n; ++i) g[i] += o.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / T(x.numel()));
}

template <typename T>
Tensor<T> sum_squares(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v * v;
  return make_result<T>({1}, {acc}, {&x}, [](Node<T>& o) {
    T* g = parent_grad(o, 0);
    const auto& in = o.parents[0]->data;
    for (std::size_t i = 0; i < in.size(); ++i) g[i] += T(2) * in[i] * o.grad[0];
  });
}

template <typename T>
Tensor<T> mean_rows(const Tensor<T>& x) {
  require_matrix(x, "mean_rows");
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<T> out(c, T(0));
  const auto d = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += d[i * c + j];
  for (T& v : out) v /= T(r);
  return make_result<T>({c}, std::move(out), {&x}, [r, c](Node<T>& o) {
    T* g = parent_grad(o, 0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += o.grad[j] / T(r);
  });
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t begin, std::size_t count) {
  require_matrix(x, "slice_cols");
  const std::size_t r = x.dim(0), c = x.dim(1);
  if (count == 0 || begin + count > c) {
    throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of range for " + shape_str(x.shape()));
  }
  std::vector<T> out(r * count);
  const auto d = x.data();
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(i * c + begin), count, out.begin() + i * count);
  return make_result<T>({r, count}, std::move(out), {&x}, [r, c, begin, count](Node<T>& o) {
    T* g = parent_grad(o, 0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < count; ++j) g[i * c + begin + j] += o.grad[i * count + j];
  });
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t r = parts[0].dim(0);
  std::size_t c = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.dim(0) != r) throw ShapeError("concat_cols: row mismatch " + shape_str(p.shape()));
    widths.push_back(p.dim(1));
    c += p.dim(1);
  }
  std::vector<T> out(r * c);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto d = parts[k].data();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(i * widths[k]), widths[k], out.begin() + i * c + off);
    off += widths[k];
  }
  Tensor<T> result({r, c}, std::move(out));
  bool any = false;
  if (grad_enabled())
    for (const auto& p : parts) any = any || p.requires_grad();
  if (any) {
    auto& node = *result.node();
    node.requires_grad = true;
    for (const auto& p : parts) node.parents.push_back(p.node());
    node.backward = [r, c, widths](Node<T>& o) {
      std::size_t off = 0;
      for (std::size_t k = 0; k < widths.size(); ++k) {
        if (T* g = parent_grad(o, k))
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < widths[k]; ++j) g[i * widths[k] + j] += o.grad[i * c + off + j];
        off += widths[k];
      }
    };
  }
  return result;
}

template <typename T>
Tensor<T> stop_gradient(const Tensor<T>& x) {
  Tensor<T> out(x.shape(), std::vector<T>(x.data().begin(), x.data().end()));
  out.node()->stop_gradient = true;
  return out;
}

template <typename T>
Tensor<T> straight_through(const Tensor<T>& source, const Tensor<T>& value) {
  require_same_shape(source, value, "straight_through");
  std::vector<T> out(value.data().begin(), value.data().end());
  return make_result<T>(source.shape(), std::move(out), {&source}, [](Node<T>& o) {
    T* g = parent_grad(o, 0);
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
  });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, T rate, std::mt19937_64& rng) {
  if (rate < T(0) || rate >= T(1)) throw ContractError("dropout: rate must lie in [0, 1)");
  if (rate == T(0)) return x;
  std::bernoulli_distribution keep(1.0 - static_cast<double>(rate));
  const T s = T(1) / (T(1) - rate);
  std::vector<T> mask(x.numel());
  for (T& m : mask) m = keep(rng) ? s : T(0);
  std::vector<T> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return make_result<T>(x.shape(), std::move(out), {&x}, [mask = std::move(mask)](Node<T>& o) {
    T* g = parent_grad(o, 0);
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * mask[i];
  });
}

#define VQL_INSTANTIATE_OPS(T)                                                                   \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> transpose(const Tensor<T>&);                                                \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> scale(const Tensor<T>&, T);                                                 \
  template Tensor<T> add_row(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> relu(const Tensor<T>&);                                                     \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                     \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);        \
  template Tensor<T> embedding(const Tensor<T>&, std::span<const std::int32_t>);                 \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const std::int32_t>);             \
  template Tensor<T> sum(const Tensor<T>&);                                                      \
  template Tensor<T> mean(const Tensor<T>&);                                                     \
  template Tensor<T> sum_squares(const Tensor<T>&);                                              \
  template Tensor<T> mean_rows(const Tensor<T>&);                                                \
  template Tensor<T> slice_cols(const Tensor<T>&, std::size_t, std::size_t);                     \
  template Tensor<T> concat_cols(const std::vector<Tensor<T>>&);                                 \
  template Tensor<T> stop_gradient(const Tensor<T>&);                                            \
  template Tensor<T> straight_through(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> dropout(const Tensor<T>&, T, std::mt19937_64&);

VQL_INSTANTIATE_OPS(float)
VQL_INSTANTIATE_OPS(double)

#undef VQL_INSTANTIATE_OPS

}  // namespace vql::ad
