#pragma once

#include <string>
#include <utility>

#include "lbmhe/rng.hpp"
#include "lbmhe/types.hpp"

namespace lbmhe {

/// Uncertain parameter vector θ ∈ R^q.
class ParamVec {
 public:
  ParamVec() = default;
  explicit ParamVec(Vector values);
  ParamVec(std::initializer_list<double> values);

  Index size() const { return values_.size(); }
  double operator[](Index j) const { return values_(j); }
  const Vector& values() const { return values_; }

  friend bool operator==(const ParamVec& a, const ParamVec& b) { return a.values_ == b.values_; }

 private:
  Vector values_;
};

/// Compact box Θ = {θ : lower ≤ θ ≤ upper}.
class ParamBox {
 public:
  ParamBox() = default;
  ParamBox(Vector lower, Vector upper);

  Index size() const { return lower_.size(); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }

  bool contains(const ParamVec& theta) const;
  /// Euclidean projection, which for a box is the componentwise clip.
  ParamVec project(const Vector& theta) const;

 private:
  Vector lower_;
  Vector upper_;
};

/// Matrix-valued affine map θ ↦ M₀ + Σⱼ θⱼ Mⱼ.
class AffineMatrixFamily {
 public:
  AffineMatrixFamily() = default;
  AffineMatrixFamily(Matrix base, MatrixList coeffs);

  /// Family that does not depend on θ (all Mⱼ zero) for a q-dimensional θ.
  static AffineMatrixFamily constant(Matrix base, Index num_params);

  Index rows() const { return base_.rows(); }
  Index cols() const { return base_.cols(); }
  Index num_params() const { return static_cast<Index>(coeffs_.size()); }

  Matrix eval(const ParamVec& theta) const;
  /// ∂eval/∂θⱼ, exact since the map is affine.
  const Matrix& partial(Index j) const { return coeffs_.at(static_cast<std::size_t>(j)); }
  const Matrix& base() const { return base_; }
  const MatrixList& coeffs() const { return coeffs_; }

 private:
  Matrix base_;
  MatrixList coeffs_;
};

/// Free-function form of AffineMatrixFamily::eval.
inline Matrix eval_family(const AffineMatrixFamily& fam, const ParamVec& theta) {
  return fam.eval(theta);
}

/// Polytope {x : H x ≤ h}. Zero rows means the whole space.
class Polytope {
 public:
  Polytope() = default;
  Polytope(Matrix H, Vector h);

  static Polytope unconstrained(Index dim);
  /// {x : ‖x‖∞ ≤ radius}
  static Polytope box(Index dim, double radius);

  Index dim() const { return H_.cols(); }
  Index num_rows() const { return H_.rows(); }
  bool empty_rows() const { return H_.rows() == 0; }
  const Matrix& H() const { return H_; }
  const Vector& h() const { return h_; }

  bool contains(const Vector& x, double tol = 0.0) const;
  /// Same normals, right-hand side scaled by `factor`.
  Polytope scaled(double factor) const;

 private:
  Matrix H_;
  Vector h_;
};

/// Gaussian N(mean, cov) restricted to a polytopic support.
class TruncatedGaussian {
 public:
  TruncatedGaussian() = default;
  TruncatedGaussian(std::string name, Vector mean, Matrix cov, Polytope support);

  const std::string& name() const { return name_; }
  const Vector& mean() const { return mean_; }
  const Matrix& cov() const { return cov_; }
  const Polytope& support() const { return support_; }
  /// Lower Cholesky factor of cov.
  const Matrix& chol() const { return chol_; }

 private:
  std::string name_;
  Vector mean_;
  Matrix cov_;
  Matrix chol_;
  Polytope support_;
};

inline constexpr int kDefaultSamplingCap = 10'000;

/// Rejection sampler: draws mean + L z until the draw lies in the support.
/// Throws SamplingError after `max_draws` rejections.
Vector sample_truncated_gaussian(const TruncatedGaussian& dist, Rng& rng,
                                 int max_draws = kDefaultSamplingCap);

/// Parameterized LTI system x⁺ = A(θ)x + B(θ)u + w, y = C(θ)x + v with
/// polytopic constraint sets and (truncated) Gaussian noise.
struct LtiModel {
  Index n = 0;
  Index m = 0;
  Index p = 0;
  Index q = 0;
  AffineMatrixFamily A;
  AffineMatrixFamily B;
  AffineMatrixFamily C;
  Matrix Q;
  Matrix R;
  TruncatedGaussian x0_prior;  // x̄₀, P₀ and X₀
  Polytope W;
  Polytope V;
  Polytope X;

  TruncatedGaussian disturbance() const;
  TruncatedGaussian noise() const;

  /// Throws ConfigError on any dimension mismatch, non-SPD Q/R/P₀ or a
  /// noise set that does not contain the origin in its interior.
  void validate() const;
};

/// Builds and validates a model; warns when (C, A) is not observable at θ.
LtiModel make_model(LtiModel model, const ParamVec& theta);

}  // namespace lbmhe
