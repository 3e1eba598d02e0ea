#pragma once

#include "sdopf/types.hpp"

namespace sdopf {

struct KronResult {
  CMat z_phase;    // p x p reduced series impedance
  CMat t_neutral;  // q x p, neutral currents = t_neutral * phase currents
};

/// Eliminate the neutral rows/columns of a primitive series-impedance matrix.
/// `primitive` is (p+q)x(p+q) with the p phase rows first; returns the Schur
/// complement Z_pp - Z_pn Z_nn^-1 Z_np and the neutral transform -Z_nn^-1 Z_np.
/// q = 0 returns the input unchanged with an empty transform.
/// Throws NumericalError if the neutral block is singular.
KronResult kron_reduce(const CMat& primitive, int phase_count);

}  // namespace sdopf
