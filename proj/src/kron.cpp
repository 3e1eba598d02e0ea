#include "sdopf/kron.hpp"

#include <Eigen/LU>

namespace sdopf {

KronResult kron_reduce(const CMat& primitive, int phase_count) {
  const int dim = static_cast<int>(primitive.rows());
  if (primitive.cols() != dim) throw InputError("primitive impedance matrix must be square");
  if (phase_count < 1 || phase_count > dim)
    throw InputError("phase count must be in [1, matrix dimension]");

  const int p = phase_count, q = dim - p;
  if (q == 0) return {primitive, CMat(0, p)};

  const CMat z_pp = primitive.topLeftCorner(p, p);
  const CMat z_pn = primitive.topRightCorner(p, q);
  const CMat z_np = primitive.bottomLeftCorner(q, p);
  const CMat z_nn = primitive.bottomRightCorner(q, q);

  Eigen::FullPivLU<CMat> lu(z_nn);
  if (!lu.isInvertible())
    throw NumericalError("Kron reduction failed: singular neutral block");

  const CMat t_neutral = -lu.solve(z_np);        // q x p
  const CMat z_phase = z_pp + z_pn * t_neutral;  // Z_pp - Z_pn Z_nn^-1 Z_np
  return {z_phase, t_neutral};
}

}  // namespace sdopf
