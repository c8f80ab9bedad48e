#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mhm {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Dense row-major double tensor with an optional gradient buffer.
///
/// Copies share storage (a Tensor is a handle); use clone() for a deep copy.
/// Operations on tensors that require gradients are recorded on a
/// thread-local tape which backward() replays in reverse and then clears.
class Tensor {
public:
    struct Impl {
        Shape shape;
        std::vector<double> data;
        std::vector<double> grad;  // empty until first accumulation
        bool requires_grad = false;
    };

    Tensor() = default;
    explicit Tensor(Shape shape, bool requires_grad = false);
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, double value);
    static Tensor scalar(double value) { return Tensor(Shape{1}, std::vector<double>{value}); }

    bool defined() const { return static_cast<bool>(impl_); }
    const Shape& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t dim(std::size_t i) const { return impl_->shape.at(i); }
    std::size_t size() const { return impl_->data.size(); }

    std::span<double> data() { return impl_->data; }
    std::span<const double> data() const { return impl_->data; }
    double& operator[](std::size_t i) { return impl_->data[i]; }
    double operator[](std::size_t i) const { return impl_->data[i]; }
    double item() const;

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool flag) { impl_->requires_grad = flag; }

    bool has_grad() const { return !impl_->grad.empty(); }
    /// Gradient buffer, allocated (zero) on first access.
    std::span<double> grad();
    std::span<const double> grad() const { return impl_->grad; }
    void zero_grad();

    Tensor clone() const;
    /// New tensor with the same values and no tape history.
    Tensor detach() const { return clone(); }

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
    const std::shared_ptr<Impl>& impl() const { return impl_; }

private:
    std::shared_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------
// Tape control

/// Disables recording of operations on this thread while alive.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

/// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse, accumulating
/// into every tensor that requires a gradient. Clears the tape afterwards.
void backward(const Tensor& loss);

/// Drops every recorded operation without running it.
void clear_tape();
std::size_t tape_size();

// ---------------------------------------------------------------------------
// Primitive operations. All forward passes are pure functions of their inputs.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);
/// ELU with alpha = 1 (continuously differentiable at zero).
Tensor elu(const Tensor& a);

Tensor sum(const Tensor& a);
/// Sum of squared differences.
Tensor sse(const Tensor& a, const Tensor& b);
/// Mean of squared differences.
Tensor mse(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& a, Shape shape);
/// Transpose of a rank-2 tensor.
Tensor transpose(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax_rows(const Tensor& a);

struct Pair {
    std::size_t h = 1;
    std::size_t w = 1;
};

/// Cross-correlation of x[C,H,W] with kernel[K,C,kh,kw].
Tensor conv2d(const Tensor& x, const Tensor& kernel, Pair stride = {1, 1}, Pair padding = {0, 0});

/// Transposed convolution of x[Ci,H,W] with kernel[Ci,Co,kh,kw] where the
/// kernel extent equals the stride, so output is Co x (H*kh) x (W*kw).
/// This is the adjoint of conv2d with the same kernel, stride and no padding.
Tensor conv_transpose2d(const Tensor& x, const Tensor& kernel, Pair stride);

/// Adds bias[C] to every spatial position of x[C,...].
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

/// Nearest-neighbour upsampling of x[C,H,W] by an integer factor.
Tensor upsample_nearest(const Tensor& x, std::size_t factor);

/// Channel k of x[C,H,W] as an H x W tensor.
Tensor channel(const Tensor& x, std::size_t k);
/// Stacks equally shaped H x W tensors into C x H x W.
Tensor stack(const std::vector<Tensor>& parts);

}  // namespace mhm
