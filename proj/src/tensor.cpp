#include "ramen/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

namespace ramen {

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void check_shape(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be >= 1, got " + shape_str(shape));
  }
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                   shape_str(b.shape()));
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail + ", got " + shape_str(a.shape()));
}

}  // namespace

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  check_shape(shape);
  auto d = std::make_shared<TensorData>();
  d->data.assign(shape_numel(shape), 0.0);
  d->shape = std::move(shape);
  d->requires_grad = requires_grad;
  return Tensor(std::move(d));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.data().begin(), t.data().end(), value);
  return t;
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data,
                         bool requires_grad) {
  check_shape(shape);
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("from_data: " + std::to_string(data.size()) +
                     " values do not fill shape " + shape_str(shape));
  }
  auto d = std::make_shared<TensorData>();
  d->shape = std::move(shape);
  d->data = std::move(data);
  d->requires_grad = requires_grad;
  return Tensor(std::move(d));
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

Tensor Tensor::uniform(std::vector<std::size_t> shape, double lo, double hi,
                       std::mt19937_64& rng, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

const std::vector<std::size_t>& Tensor::shape() const { return d_->shape; }
std::size_t Tensor::numel() const { return d_->data.size(); }

std::size_t Tensor::rows() const {
  if (ndim() != 2) throw ShapeError("rows(): tensor is not 2-d, got " + shape_str(shape()));
  return d_->shape[0];
}

std::size_t Tensor::cols() const {
  if (ndim() != 2) throw ShapeError("cols(): tensor is not 2-d, got " + shape_str(shape()));
  return d_->shape[1];
}

std::vector<double>& Tensor::data() { return d_->data; }
const std::vector<double>& Tensor::data() const { return d_->data; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item(): tensor is not scalar, got " + shape_str(shape()));
  return d_->data[0];
}

double Tensor::at(std::size_t i) const { return d_->data.at(i); }
double& Tensor::at(std::size_t i) { return d_->data.at(i); }

double Tensor::at(std::size_t r, std::size_t c) const {
  return d_->data.at(r * cols() + c);
}
double& Tensor::at(std::size_t r, std::size_t c) {
  return d_->data.at(r * cols() + c);
}

bool Tensor::requires_grad() const { return d_ && d_->requires_grad; }
void Tensor::set_requires_grad(bool v) { d_->requires_grad = v; }
bool Tensor::has_grad() const { return d_ && !d_->grad.empty(); }

std::vector<double>& Tensor::grad() {
  if (d_->grad.empty()) d_->grad.assign(d_->data.size(), 0.0);
  return d_->grad;
}

const std::vector<double>& Tensor::grad() const {
  if (d_->grad.empty()) throw std::logic_error("grad(): no gradient has been accumulated");
  return d_->grad;
}

void Tensor::zero_grad() {
  if (d_) d_->grad.assign(d_->data.size(), 0.0);
}

// --- tape ---------------------------------------------------------------

namespace {
thread_local std::vector<Tape*> g_tape_stack;
}

Tape::Tape() { g_tape_stack.push_back(this); }

Tape::~Tape() {
  // tapes must unwind innermost-first
  if (!g_tape_stack.empty() && g_tape_stack.back() == this) g_tape_stack.pop_back();
}

Tape* Tape::active() { return g_tape_stack.empty() ? nullptr : g_tape_stack.back(); }

void Tape::record(const char* op, std::vector<Tensor> inputs, Tensor output,
                  std::function<void(Node&)> backward_fn) {
  nodes_.push_back(Node{op, std::move(inputs), std::move(output), std::move(backward_fn)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " +
                     (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  loss.impl()->grad.assign(1, 1.0);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->output.has_grad()) continue;  // not reachable from loss
    it->backward(*it);
  }
}

// --- primitive plumbing ---------------------------------------------------

namespace ops {

namespace {

bool any_requires_grad(const std::vector<Tensor>& inputs) {
  for (const auto& t : inputs) {
    if (t.requires_grad()) return true;
  }
  return false;
}

Tensor make_result(const char* op, std::vector<std::size_t> shape, std::vector<double> data,
                   std::vector<Tensor> inputs, std::function<void(Tape::Node&)> backward_fn) {
  Tape* tape = Tape::active();
  const bool track = tape != nullptr && any_requires_grad(inputs);
  Tensor out = Tensor::from_data(std::move(shape), std::move(data), track);
  if (track) tape->record(op, std::move(inputs), out, std::move(backward_fn));
  return out;
}

// Elementwise binary op with df/da, df/db given the incoming grad g.
template <typename Fwd, typename BackA, typename BackB>
Tensor ew_binary(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, BackA ba, BackB bb) {
  if (a.shape() != b.shape()) shape_error(op, a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.data()[i], b.data()[i]);
  return make_result(op, a.shape(), std::move(out), {a, b}, [ba, bb](Tape::Node& n) {
    Tensor a = n.inputs[0];
    Tensor b = n.inputs[1];
    const auto& g = n.output.grad();
    if (a.requires_grad()) {
      auto& ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += ba(g[i], a.data()[i], b.data()[i]);
    }
    if (b.requires_grad()) {
      auto& gb = b.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += bb(g[i], a.data()[i], b.data()[i]);
    }
  });
}

// Elementwise unary op; backward receives (g, x, y).
template <typename Fwd, typename Back>
Tensor ew_unary(const char* op, const Tensor& a, Fwd fwd, Back back) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.data()[i]);
  return make_result(op, a.shape(), std::move(out), {a}, [back](Tape::Node& n) {
    Tensor a = n.inputs[0];
    if (!a.requires_grad()) return;
    const auto& g = n.output.grad();
    const auto& y = n.output.data();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += back(g[i], a.data()[i], y[i]);
  });
}

// Interprets a tensor as a stack of rows over its last axis.
struct RowView {
  std::size_t nrows;
  std::size_t width;
};

RowView last_axis_view(const Tensor& t) {
  const auto& s = t.shape();
  std::size_t width = s.back();
  return RowView{t.numel() / width, width};
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return ew_binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double g, double, double) { return g; }, [](double g, double, double) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return ew_binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double g, double, double) { return g; }, [](double g, double, double) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return ew_binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double g, double, double y) { return g * y; },
      [](double g, double x, double) { return g * x; });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * s;
  return make_result("scale", a.shape(), std::move(out), {a}, [s](Tape::Node& n) {
    Tensor a = n.inputs[0];
    if (!a.requires_grad()) return;
    const auto& g = n.output.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows()) shape_error("matmul", a, b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a.data()[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * b.data()[p * n + j];
    }
  }
  return make_result("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Tape::Node& nd) {
    Tensor a = nd.inputs[0];
    Tensor b = nd.inputs[1];
    const auto& g = nd.output.grad();
    if (a.requires_grad()) {
      auto& ga = a.grad();  // g (m,n) x b^T (n,k)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double gv = g[i * n + j];
          for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += gv * b.data()[p * n + j];
        }
    }
    if (b.requires_grad()) {
      auto& gb = b.grad();  // a^T (k,m) x g (m,n)
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t i = 0; i < m; ++i) {
          const double av = a.data()[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
        }
    }
  });
}

Tensor matvec(const Tensor& w, const Tensor& x) {
  if (w.ndim() != 2 || x.ndim() != 1 || w.cols() != x.numel()) shape_error("matvec", w, x);
  const std::size_t m = w.rows(), k = w.cols();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += w.data()[i * k + p] * x.data()[p];
    out[i] = acc;
  }
  return make_result("matvec", {m}, std::move(out), {w, x}, [m, k](Tape::Node& nd) {
    Tensor w = nd.inputs[0];
    Tensor x = nd.inputs[1];
    const auto& g = nd.output.grad();
    if (w.requires_grad()) {
      auto& gw = w.grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) gw[i * k + p] += g[i] * x.data()[p];
    }
    if (x.requires_grad()) {
      auto& gx = x.grad();
      for (std::size_t i = 0; i < m; ++i) {
        const double gv = g[i];
        for (std::size_t p = 0; p < k; ++p) gx[p] += gv * w.data()[i * k + p];
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  if (a.ndim() != 2) shape_error("transpose", a, "expected a 2-d tensor");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.data()[i * n + j];
  return make_result("transpose", {n, m}, std::move(out), {a}, [m, n](Tape::Node& nd) {
    Tensor a = nd.inputs[0];
    if (!a.requires_grad()) return;
    const auto& g = nd.output.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
  });
}

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.ndim() != b.ndim()) shape_error("concat", a, b);
  if (a.ndim() == 2 && a.rows() != b.rows()) shape_error("concat", a, b);
  if (a.ndim() > 2) shape_error("concat", a, "expected 1-d or 2-d tensors");
  const RowView va = last_axis_view(a), vb = last_axis_view(b);
  const std::size_t width = va.width + vb.width;
  std::vector<double> out(va.nrows * width);
  for (std::size_t r = 0; r < va.nrows; ++r) {
    for (std::size_t j = 0; j < va.width; ++j) out[r * width + j] = a.data()[r * va.width + j];
    for (std::size_t j = 0; j < vb.width; ++j)
      out[r * width + va.width + j] = b.data()[r * vb.width + j];
  }
  std::vector<std::size_t> shape = a.shape();
  shape.back() = width;
  return make_result("concat", std::move(shape), std::move(out), {a, b},
                     [va, vb, width](Tape::Node& nd) {
                       Tensor a = nd.inputs[0];
                       Tensor b = nd.inputs[1];
                       const auto& g = nd.output.grad();
                       if (a.requires_grad()) {
                         auto& ga = a.grad();
                         for (std::size_t r = 0; r < va.nrows; ++r)
                           for (std::size_t j = 0; j < va.width; ++j)
                             ga[r * va.width + j] += g[r * width + j];
                       }
                       if (b.requires_grad()) {
                         auto& gb = b.grad();
                         for (std::size_t r = 0; r < vb.nrows; ++r)
                           for (std::size_t j = 0; j < vb.width; ++j)
                             gb[r * vb.width + j] += g[r * width + va.width + j];
                       }
                     });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t len) {
  if (a.ndim() > 2 || axis >= a.ndim()) shape_error("slice", a, "axis out of range");
  const std::size_t extent = a.shape()[axis];
  if (len == 0 || start + len > extent) {
    throw ShapeError("slice: range [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") out of bounds for axis extent " +
                     std::to_string(extent));
  }
  std::vector<std::size_t> shape = a.shape();
  shape[axis] = len;
  const std::size_t nrows = a.ndim() == 2 ? a.shape()[0] : 1;
  const std::size_t ncols = a.shape().back();
  std::vector<double> out;
  out.reserve(shape_numel(shape));
  if (a.ndim() == 1 || axis == 1) {  // slice columns
    const std::size_t r0 = 0, r1 = a.ndim() == 1 ? 1 : nrows;
    for (std::size_t r = r0; r < r1; ++r)
      for (std::size_t j = 0; j < len; ++j) out.push_back(a.data()[r * ncols + start + j]);
  } else {  // slice rows
    out.assign(a.data().begin() + start * ncols, a.data().begin() + (start + len) * ncols);
  }
  const bool by_cols = (a.ndim() == 1 || axis == 1);
  return make_result("slice", std::move(shape), std::move(out), {a},
                     [by_cols, start, len, nrows, ncols](Tape::Node& nd) {
                       Tensor a = nd.inputs[0];
                       if (!a.requires_grad()) return;
                       const auto& g = nd.output.grad();
                       auto& ga = a.grad();
                       if (by_cols) {
                         const std::size_t r1 = a.ndim() == 1 ? 1 : nrows;
                         for (std::size_t r = 0; r < r1; ++r)
                           for (std::size_t j = 0; j < len; ++j)
                             ga[r * ncols + start + j] += g[r * len + j];
                       } else {
                         for (std::size_t i = 0; i < g.size(); ++i) ga[start * ncols + i] += g[i];
                       }
                     });
}

Tensor row(const Tensor& a, std::size_t i) {
  if (a.ndim() != 2) shape_error("row", a, "expected a 2-d tensor");
  if (i >= a.rows()) {
    throw ShapeError("row: index " + std::to_string(i) + " out of range for " +
                     shape_str(a.shape()));
  }
  const std::size_t n = a.cols();
  std::vector<double> out(a.data().begin() + i * n, a.data().begin() + (i + 1) * n);
  return make_result("row", {n}, std::move(out), {a}, [i, n](Tape::Node& nd) {
    Tensor a = nd.inputs[0];
    if (!a.requires_grad()) return;
    const auto& g = nd.output.grad();
    auto& ga = a.grad();
    for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j];
  });
}

Tensor stack_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("stack_rows: no inputs");
  std::size_t width = parts[0].shape().back();
  std::size_t total_rows = 0;
  for (const auto& p : parts) {
    if (p.ndim() > 2) shape_error("stack_rows", p, "expected 1-d or 2-d parts");
    if (p.shape().back() != width) shape_error("stack_rows", parts[0], p);
    total_rows += p.ndim() == 2 ? p.rows() : 1;
  }
  std::vector<double> out;
  out.reserve(total_rows * width);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return make_result("stack_rows", {total_rows, width}, std::move(out), parts,
                     [](Tape::Node& nd) {
                       const auto& g = nd.output.grad();
                       std::size_t offset = 0;
                       for (Tensor& p : nd.inputs) {
                         if (p.requires_grad()) {
                           auto& gp = p.grad();
                           for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offset + i];
                         }
                         offset += p.numel();
                       }
                     });
}

Tensor broadcast_row(const Tensor& v, std::size_t n) {
  if (v.ndim() != 1) shape_error("broadcast_row", v, "expected a 1-d tensor");
  if (n == 0) throw ShapeError("broadcast_row: row count must be >= 1");
  const std::size_t d = v.numel();
  std::vector<double> out(n * d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = v.data()[j];
  return make_result("broadcast_row", {n, d}, std::move(out), {v}, [n, d](Tape::Node& nd) {
    Tensor v = nd.inputs[0];
    if (!v.requires_grad()) return;
    const auto& g = nd.output.grad();
    auto& gv = v.grad();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < d; ++j) gv[j] += g[r * d + j];
  });
}

Tensor sigmoid(const Tensor& a) {
  return ew_unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double g, double, double y) { return g * y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return ew_unary("tanh", a, [](double x) { return std::tanh(x); },
                  [](double g, double, double y) { return g * (1.0 - y * y); });
}

Tensor relu(const Tensor& a) {
  return ew_unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
                  [](double g, double x, double) { return x > 0.0 ? g : 0.0; });
}

Tensor log(const Tensor& a) {
  return ew_unary("log", a, [](double x) { return std::log(x); },
                  [](double g, double x, double) { return g / x; });
}

Tensor sqrt(const Tensor& a) {
  return ew_unary("sqrt", a, [](double x) { return std::sqrt(x); },
                  [](double g, double, double y) { return 0.5 * g / y; });
}

Tensor rsqrt(const Tensor& a) {
  return ew_unary("rsqrt", a, [](double x) { return 1.0 / std::sqrt(x); },
                  [](double g, double, double y) { return -0.5 * g * y * y * y; });
}

Tensor softmax(const Tensor& a) {
  if (a.ndim() > 2) shape_error("softmax", a, "expected 1-d or 2-d tensor");
  const RowView v = last_axis_view(a);
  std::vector<double> out(a.numel());
  for (std::size_t r = 0; r < v.nrows; ++r) {
    const double* x = a.data().data() + r * v.width;
    double* y = out.data() + r * v.width;
    double mx = x[0];
    for (std::size_t j = 1; j < v.width; ++j) mx = std::max(mx, x[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < v.width; ++j) {
      y[j] = std::exp(x[j] - mx);
      s += y[j];
    }
    for (std::size_t j = 0; j < v.width; ++j) y[j] /= s;
  }
  return make_result("softmax", a.shape(), std::move(out), {a}, [v](Tape::Node& nd) {
    Tensor a = nd.inputs[0];
    if (!a.requires_grad()) return;
    const auto& g = nd.output.grad();
    const auto& y = nd.output.data();
    auto& ga = a.grad();
    for (std::size_t r = 0; r < v.nrows; ++r) {
      const std::size_t base = r * v.width;
      double dot = 0.0;
      for (std::size_t j = 0; j < v.width; ++j) dot += g[base + j] * y[base + j];
      for (std::size_t j = 0; j < v.width; ++j)
        ga[base + j] += y[base + j] * (g[base + j] - dot);
    }
  });
}

Tensor log_softmax(const Tensor& a) {
  if (a.ndim() > 2) shape_error("log_softmax", a, "expected 1-d or 2-d tensor");
  const RowView v = last_axis_view(a);
  std::vector<double> out(a.numel());
  for (std::size_t r = 0; r < v.nrows; ++r) {
    const double* x = a.data().data() + r * v.width;
    double* y = out.data() + r * v.width;
    double mx = x[0];
    for (std::size_t j = 1; j < v.width; ++j) mx = std::max(mx, x[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < v.width; ++j) s += std::exp(x[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < v.width; ++j) y[j] = x[j] - lse;
  }
  return make_result("log_softmax", a.shape(), std::move(out), {a}, [v](Tape::Node& nd) {
    Tensor a = nd.inputs[0];
    if (!a.requires_grad()) return;
    const auto& g = nd.output.grad();
    const auto& y = nd.output.data();
    auto& ga = a.grad();
    for (std::size_t r = 0; r < v.nrows; ++r) {
      const std::size_t base = r * v.width;
      double gsum = 0.0;
      for (std::size_t j = 0; j < v.width; ++j) gsum += g[base + j];
      for (std::size_t j = 0; j < v.width; ++j)
        ga[base + j] += g[base + j] - std::exp(y[base + j]) * gsum;
    }
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_result("sum", {1}, {s}, {a}, [](Tape::Node& nd) {
    Tensor a = nd.inputs[0];
    if (!a.requires_grad()) return;
    const double g = nd.output.grad()[0];
    auto& ga = a.grad();
    for (double& v : ga) v += g;
  });
}

Tensor mean(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  const double inv_n = 1.0 / static_cast<double>(a.numel());
  return make_result("mean", {1}, {s * inv_n}, {a}, [inv_n](Tape::Node& nd) {
    Tensor a = nd.inputs[0];
    if (!a.requires_grad()) return;
    const double g = nd.output.grad()[0] * inv_n;
    auto& ga = a.grad();
    for (double& v : ga) v += g;
  });
}

Tensor mean_rows(const Tensor& a) {
  if (a.ndim() != 2) shape_error("mean_rows", a, "expected a 2-d tensor");
  const std::size_t n = a.rows(), d = a.cols();
  std::vector<double> out(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) out[j] += a.data()[r * d + j];
  const double inv_n = 1.0 / static_cast<double>(n);
  for (double& v : out) v *= inv_n;
  return make_result("mean_rows", {d}, std::move(out), {a}, [n, d, inv_n](Tape::Node& nd) {
    Tensor a = nd.inputs[0];
    if (!a.requires_grad()) return;
    const auto& g = nd.output.grad();
    auto& ga = a.grad();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < d; ++j) ga[r * d + j] += g[j] * inv_n;
  });
}

Tensor embedding_gather(const Tensor& table, const std::vector<int>& ids) {
  if (table.ndim() != 2) shape_error("embedding_gather", table, "expected a 2-d table");
  if (ids.empty()) throw ShapeError("embedding_gather: empty id list");
  const std::size_t vocab = table.rows(), d = table.cols();
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw std::out_of_range("embedding_gather: id " + std::to_string(id) +
                              " out of range [0," + std::to_string(vocab) + ")");
    }
  }
  std::vector<double> out(ids.size() * d);
  for (std::size_t t = 0; t < ids.size(); ++t)
    for (std::size_t j = 0; j < d; ++j)
      out[t * d + j] = table.data()[static_cast<std::size_t>(ids[t]) * d + j];
  return make_result("embedding_gather", {ids.size(), d}, std::move(out), {table},
                     [ids, d](Tape::Node& nd) {
                       Tensor table = nd.inputs[0];
                       if (!table.requires_grad()) return;
                       const auto& g = nd.output.grad();
                       auto& gt = table.grad();
                       for (std::size_t t = 0; t < ids.size(); ++t)
                         for (std::size_t j = 0; j < d; ++j)
                           gt[static_cast<std::size_t>(ids[t]) * d + j] += g[t * d + j];
                     });
}

}  // namespace ops

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 0x632be59bd9b4e019ULL);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}

}  // namespace ramen
