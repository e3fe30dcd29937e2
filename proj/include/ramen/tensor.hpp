#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ramen {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string shape_str(const std::vector<std::size_t>& shape);

struct TensorData {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until first touched by backward
};

/// Handle to a dense row-major f64 tensor. Copies share storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<std::size_t> shape, double value, bool requires_grad = false);
  static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value);
  static Tensor uniform(std::vector<std::size_t> shape, double lo, double hi,
                        std::mt19937_64& rng, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(d_); }
  const std::vector<std::size_t>& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t numel() const;
  std::size_t rows() const;  // 2-d only
  std::size_t cols() const;

  std::vector<double>& data();
  const std::vector<double>& data() const;
  double item() const;  // scalar (numel == 1) only

  double at(std::size_t i) const;
  double& at(std::size_t i);
  double at(std::size_t r, std::size_t c) const;
  double& at(std::size_t r, std::size_t c);

  bool requires_grad() const;
  void set_requires_grad(bool v);
  bool has_grad() const;
  std::vector<double>& grad();              // allocates zeros on first use
  const std::vector<double>& grad() const;  // throws if never allocated
  void zero_grad();

  bool same_storage(const Tensor& other) const { return d_ == other.d_; }
  TensorData* impl() const { return d_.get(); }

 private:
  explicit Tensor(std::shared_ptr<TensorData> d) : d_(std::move(d)) {}
  std::shared_ptr<TensorData> d_;
};

/// Reverse-mode tape. One tape per thread may be active at a time; primitives
/// applied while it is active are recorded if any input requires a gradient.
class Tape {
 public:
  struct Node {
    const char* op;
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void(Node&)> backward;
  };

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  std::size_t size() const { return nodes_.size(); }

  /// Accumulates dLoss/dX into .grad() of every recorded tensor reachable
  /// from loss, walking nodes in reverse record order (fixed summation order).
  void backward(const Tensor& loss);

  void record(const char* op, std::vector<Tensor> inputs, Tensor output,
              std::function<void(Node&)> backward_fn);

 private:
  std::vector<Node> nodes_;
};

namespace ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor matmul(const Tensor& a, const Tensor& b);     // (m,k)x(k,n) -> (m,n)
Tensor matvec(const Tensor& w, const Tensor& x);     // (m,k)x(k,)  -> (m,)
Tensor transpose(const Tensor& a);                   // 2-d
Tensor concat(const Tensor& a, const Tensor& b);     // along last axis
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t len);
Tensor row(const Tensor& a, std::size_t i);          // (n,d) -> (d,)
Tensor stack_rows(const std::vector<Tensor>& parts); // 1-d parts become rows
Tensor broadcast_row(const Tensor& v, std::size_t n);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softmax(const Tensor& a);      // over last axis, max-subtracted
Tensor log_softmax(const Tensor& a);  // over last axis
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor rsqrt(const Tensor& a);
Tensor sum(const Tensor& a);       // full reduce -> scalar
Tensor mean(const Tensor& a);      // full reduce -> scalar
Tensor mean_rows(const Tensor& a); // (n,d) -> (d,) column means
Tensor embedding_gather(const Tensor& table, const std::vector<int>& ids);

}  // namespace ops

/// splitmix64-style mixer for deriving independent seeds from (seed, stream).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c);

}  // namespace ramen
