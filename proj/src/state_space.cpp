#include "pnpcert/state_space.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace pnpcert {

StateSpaceModel::StateSpaceModel(Mat A, Mat B, Mat C, Mat D)
    : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), D_(std::move(D)) {
  if (A_.rows() != A_.cols()) throw DimensionMismatch("A must be square");
  if (B_.rows() != A_.rows()) throw DimensionMismatch("B row count != state dim");
  if (C_.cols() != A_.rows()) throw DimensionMismatch("C col count != state dim");
  if (D_.rows() != C_.rows() || D_.cols() != B_.cols())
    throw DimensionMismatch("D not conformant with B, C");
  if (!A_.allFinite() || !B_.allFinite() || !C_.allFinite() || !D_.allFinite())
    throw ValidationError("state-space matrices must be finite");
  if (A_.rows() > 0) {
    Eigen::EigenSolver<Mat> es(A_, /*computeEigenvectors=*/false);
    poles_ = es.eigenvalues();
  }
}

StateSpaceModel StateSpaceModel::static_gain(Mat D) {
  const Eigen::Index p = D.rows(), m = D.cols();
  return StateSpaceModel(Mat::Zero(0, 0), Mat::Zero(0, m), Mat::Zero(p, 0),
                         std::move(D));
}

CMat freq_response(const StateSpaceModel& sys, double omega) {
  const Eigen::Index n = sys.order();
  if (n == 0) return sys.D().cast<Complex>();
  const Complex s(0.0, omega);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Complex p = sys.poles()(i);
    if (std::abs(s - p) <= 1e-9 * std::max(1.0, std::abs(p)))
      throw SingularResolvent("jw coincides with a pole of the system");
  }
  CMat res = s * CMat::Identity(n, n) - sys.A().cast<Complex>();
  CMat X = res.partialPivLu().solve(sys.B().cast<Complex>());
  return sys.C().cast<Complex>() * X + sys.D().cast<Complex>();
}

StateSpaceModel series(const StateSpaceModel& after, const StateSpaceModel& before) {
  if (before.outputs() != after.inputs())
    throw DimensionMismatch("series: output dim of 'before' != input dim of 'after'");
  const Eigen::Index n1 = before.order(), n2 = after.order();
  Mat A = Mat::Zero(n1 + n2, n1 + n2);
  A.topLeftCorner(n1, n1) = before.A();
  A.bottomLeftCorner(n2, n1) = after.B() * before.C();
  A.bottomRightCorner(n2, n2) = after.A();
  Mat B(n1 + n2, before.inputs());
  B.topRows(n1) = before.B();
  B.bottomRows(n2) = after.B() * before.D();
  Mat C(after.outputs(), n1 + n2);
  C.leftCols(n1) = after.D() * before.C();
  C.rightCols(n2) = after.C();
  Mat D = after.D() * before.D();
  return StateSpaceModel(std::move(A), std::move(B), std::move(C), std::move(D));
}

StateSpaceModel affine_blend(const StateSpaceModel& g0, const StateSpaceModel& g1,
                             double alpha) {
  if (g0.inputs() != g1.inputs() || g0.outputs() != g1.outputs())
    throw DimensionMismatch("affine_blend: operand I/O dimensions differ");
  const Eigen::Index n0 = g0.order(), n1 = g1.order();
  Mat A = Mat::Zero(n0 + n1, n0 + n1);
  A.topLeftCorner(n0, n0) = g0.A();
  A.bottomRightCorner(n1, n1) = g1.A();
  Mat B(n0 + n1, g0.inputs());
  B.topRows(n0) = g0.B();
  B.bottomRows(n1) = g1.B();
  Mat C(g0.outputs(), n0 + n1);
  C.leftCols(n0) = (1.0 - alpha) * g0.C();
  C.rightCols(n1) = alpha * g1.C();
  Mat D = (1.0 - alpha) * g0.D() + alpha * g1.D();
  return StateSpaceModel(std::move(A), std::move(B), std::move(C), std::move(D));
}

double hermitian_min_eig(const CMat& M) {
  if (M.rows() != M.cols()) throw DimensionMismatch("hermitian_min_eig: square input required");
  CMat H = 0.5 * (M + M.adjoint());
  Eigen::SelfAdjointEigenSolver<CMat> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_singular_value(const CMat& M) {
  if (M.size() == 0) return 0.0;
  return M.jacobiSvd().singularValues()(0);
}

bool is_hurwitz(const StateSpaceModel& sys, double margin) {
  for (Eigen::Index i = 0; i < sys.order(); ++i)
    if (sys.poles()(i).real() >= -margin) return false;
  return true;
}

std::vector<Complex> transmission_zeros(const StateSpaceModel& sys) {
  if (sys.inputs() != sys.outputs())
    throw DimensionMismatch("transmission_zeros: square system required");
  const Eigen::Index n = sys.order(), m = sys.inputs();
  if (n == 0) {
    // Static square system: no finite zeros unless D is singular, in which
    // case the pencil is degenerate.
    Eigen::FullPivLU<Mat> lu(sys.D());
    if (!lu.isInvertible()) throw DegeneratePencil("static system with singular D");
    return {};
  }
  Mat P(n + m, n + m), Q = Mat::Zero(n + m, n + m);
  P.topLeftCorner(n, n) = sys.A();
  P.topRightCorner(n, m) = sys.B();
  P.bottomLeftCorner(m, n) = sys.C();
  P.bottomRightCorner(m, m) = sys.D();
  Q.topLeftCorner(n, n) = Mat::Identity(n, n);

  Eigen::GeneralizedEigenSolver<Mat> ges;
  ges.compute(P, Q, /*computeEigenvectors=*/false);
  const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());

  std::vector<Complex> zeros;
  int degenerate = 0;
  for (Eigen::Index i = 0; i < n + m; ++i) {
    const Complex a = ges.alphas()(i);
    const double b = ges.betas()(i);
    if (std::abs(b) > 1e-10) {
      zeros.push_back(a / b);
    } else if (std::abs(a) < 1e-10 * scale) {
      ++degenerate;
    }
  }
  // A regular pencil yields exactly m eigenvalues at infinity beyond the
  // finite zero count; simultaneous alpha=beta=0 indicates singularity.
  if (degenerate > 0 && static_cast<Eigen::Index>(zeros.size()) + degenerate > n + m - m)
    throw DegeneratePencil("zero pencil singular beyond rank tolerance");
  return zeros;
}

bool minimum_phase(const StateSpaceModel& sys, double tol) {
  for (const Complex& z : transmission_zeros(sys))
    if (z.real() >= -tol) return false;
  return true;
}

}  // namespace pnpcert
