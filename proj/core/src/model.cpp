#include "lbmhe/model.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <sstream>

#include "lbmhe/errors.hpp"
#include "lbmhe/linalg.hpp"

namespace lbmhe {

namespace {

std::string dims(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void require_dims(const Matrix& m, Index rows, Index cols, const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << what << ": expected " << rows << "x" << cols << ", got " << dims(m);
    throw ConfigError(os.str());
  }
}

void require_spd(const Matrix& m, const std::string& what) {
  if (m.rows() != m.cols() || (m - m.transpose()).norm() > 1e-12 * (1.0 + m.norm())) {
    throw ConfigError(what + " must be symmetric");
  }
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw ConfigError(what + " must be positive definite");
}

}  // namespace

ParamVec::ParamVec(Vector values) : values_(std::move(values)) {
  if (!values_.allFinite()) throw ConfigError("parameter vector has non-finite entries");
}

ParamVec::ParamVec(std::initializer_list<double> values)
    : ParamVec(Vector::Map(values.begin(), static_cast<Index>(values.size()))) {}

ParamBox::ParamBox(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() != upper_.size()) throw ConfigError("parameter box bounds differ in length");
  if ((lower_.array() > upper_.array()).any()) throw ConfigError("parameter box has lower > upper");
}

bool ParamBox::contains(const ParamVec& theta) const {
  return theta.size() == size() && (theta.values().array() >= lower_.array()).all() &&
         (theta.values().array() <= upper_.array()).all();
}

ParamVec ParamBox::project(const Vector& theta) const {
  if (theta.size() != size()) throw ConfigError("parameter length does not match box");
  return ParamVec(theta.cwiseMax(lower_).cwiseMin(upper_));
}

AffineMatrixFamily::AffineMatrixFamily(Matrix base, MatrixList coeffs)
    : base_(std::move(base)), coeffs_(std::move(coeffs)) {
  for (std::size_t j = 0; j < coeffs_.size(); ++j) {
    require_dims(coeffs_[j], base_.rows(), base_.cols(),
                 "family coefficient " + std::to_string(j));
  }
}

AffineMatrixFamily AffineMatrixFamily::constant(Matrix base, Index num_params) {
  MatrixList coeffs(static_cast<std::size_t>(num_params), Matrix::Zero(base.rows(), base.cols()));
  return AffineMatrixFamily(std::move(base), std::move(coeffs));
}

Matrix AffineMatrixFamily::eval(const ParamVec& theta) const {
  if (theta.size() != num_params()) {
    throw ConfigError("family expects " + std::to_string(num_params()) + " parameters, got " +
                      std::to_string(theta.size()));
  }
  Matrix out = base_;
  for (Index j = 0; j < num_params(); ++j) out += theta[j] * coeffs_[static_cast<std::size_t>(j)];
  return out;
}

Polytope::Polytope(Matrix H, Vector h) : H_(std::move(H)), h_(std::move(h)) {
  if (H_.rows() != h_.size()) throw ConfigError("polytope H and h row counts differ");
}

Polytope Polytope::unconstrained(Index dim) { return Polytope(Matrix(0, dim), Vector(0)); }

Polytope Polytope::box(Index dim, double radius) {
  Matrix H(2 * dim, dim);
  H << Matrix::Identity(dim, dim), -Matrix::Identity(dim, dim);
  return Polytope(std::move(H), Vector::Constant(2 * dim, radius));
}

bool Polytope::contains(const Vector& x, double tol) const {
  if (x.size() != dim()) throw ConfigError("polytope membership: dimension mismatch");
  if (empty_rows()) return true;
  return ((H_ * x - h_).array() <= tol).all();
}

Polytope Polytope::scaled(double factor) const { return Polytope(H_, factor * h_); }

TruncatedGaussian::TruncatedGaussian(std::string name, Vector mean, Matrix cov, Polytope support)
    : name_(std::move(name)), mean_(std::move(mean)), cov_(std::move(cov)), support_(std::move(support)) {
  require_dims(cov_, mean_.size(), mean_.size(), name_ + " covariance");
  require_spd(cov_, name_ + " covariance");
  if (support_.dim() != mean_.size()) throw ConfigError(name_ + " support has wrong dimension");
  chol_ = Eigen::LLT<Matrix>(cov_).matrixL();
}

Vector sample_truncated_gaussian(const TruncatedGaussian& dist, Rng& rng, int max_draws) {
  const Index n = dist.mean().size();
  for (int draw = 0; draw < max_draws; ++draw) {
    Vector x = dist.mean() + dist.chol() * rng.normal(n);
    if (dist.support().contains(x)) return x;
  }
  throw SamplingError("truncated Gaussian '" + dist.name() + "': no accepted draw in " +
                      std::to_string(max_draws) + " attempts (support/covariance mismatch?)");
}

TruncatedGaussian LtiModel::disturbance() const {
  return TruncatedGaussian("W", Vector::Zero(n), Q, W);
}

TruncatedGaussian LtiModel::noise() const { return TruncatedGaussian("V", Vector::Zero(p), R, V); }

void LtiModel::validate() const {
  if (n <= 0 || m < 0 || p <= 0 || q < 0) throw ConfigError("model dimensions must be positive");
  require_dims(A.base(), n, n, "A");
  require_dims(B.base(), n, m, "B");
  require_dims(C.base(), p, n, "C");
  for (const auto* fam : {&A, &B, &C}) {
    if (fam->num_params() != q) throw ConfigError("family parameter count differs from q");
  }
  require_dims(Q, n, n, "Q");
  require_dims(R, p, p, "R");
  require_spd(Q, "Q");
  require_spd(R, "R");
  if (x0_prior.mean().size() != n) throw ConfigError("x0 prior has wrong dimension");
  if (W.dim() != n) throw ConfigError("W has wrong dimension");
  if (V.dim() != p) throw ConfigError("V has wrong dimension");
  if (X.dim() != n) throw ConfigError("X has wrong dimension");
  // zero-mean noise: origin strictly inside W and V
  if (!W.empty_rows() && !((W.h().array() > 0.0).all())) {
    throw ConfigError("W must contain the origin in its interior");
  }
  if (!V.empty_rows() && !((V.h().array() > 0.0).all())) {
    throw ConfigError("V must contain the origin in its interior");
  }
}

LtiModel make_model(LtiModel model, const ParamVec& theta) {
  model.validate();
  if (theta.size() != model.q) throw ConfigError("θ length does not match model q");
  if (!is_observable(model.A.eval(theta), model.C.eval(theta))) {
    std::ostringstream os;
    os << theta.values().transpose();
    spdlog::warn("(C(θ), A(θ)) is not observable at θ = [{}]", os.str());
  }
  return model;
}

}  // namespace lbmhe
