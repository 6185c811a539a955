#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "pnpcert/errors.hpp"

namespace pnpcert {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using Complex = std::complex<double>;

/// Finite-dimensional LTI system x' = Ax + Bu, y = Cx + Du.
/// Immutable after construction; eigenvalues of A are cached eagerly
/// (state dimensions stay small, <= ~30 per component).
class StateSpaceModel {
 public:
  StateSpaceModel(Mat A, Mat B, Mat C, Mat D);

  /// Static (memoryless) system y = Du.
  static StateSpaceModel static_gain(Mat D);

  const Mat& A() const { return A_; }
  const Mat& B() const { return B_; }
  const Mat& C() const { return C_; }
  const Mat& D() const { return D_; }

  Eigen::Index order() const { return A_.rows(); }
  Eigen::Index inputs() const { return B_.cols(); }
  Eigen::Index outputs() const { return C_.rows(); }

  const CVec& poles() const { return poles_; }

 private:
  Mat A_, B_, C_, D_;
  CVec poles_;
};

/// C (jwI - A)^{-1} B + D. Throws SingularResolvent when jw sits within
/// relative tolerance 1e-9 of an eigenvalue of A.
CMat freq_response(const StateSpaceModel& sys, double omega);

/// Realization of after(s) * before(s).
StateSpaceModel series(const StateSpaceModel& after, const StateSpaceModel& before);

/// Realization of (1-alpha)*G0 + alpha*G1 with the stacked state of both
/// operands, so the state dimension does not depend on alpha.
StateSpaceModel affine_blend(const StateSpaceModel& g0, const StateSpaceModel& g1,
                             double alpha);

/// lambda_min of the Hermitian part (M + M^H)/2.
double hermitian_min_eig(const CMat& M);

/// Largest singular value.
double max_singular_value(const CMat& M);

/// True iff every eigenvalue of A has real part < -margin.
bool is_hurwitz(const StateSpaceModel& sys, double margin = 0.0);

/// True iff all finite transmission zeros of the (square) system have
/// real part < -tol. Throws DegeneratePencil on a singular zero pencil.
bool minimum_phase(const StateSpaceModel& sys, double tol = 0.0);

/// Finite transmission zeros of a square system.
std::vector<Complex> transmission_zeros(const StateSpaceModel& sys);

}  // namespace pnpcert
