#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sdopf/types.hpp"

namespace sdopf {

/// One upper-triangle entry of a Hermitian coefficient: r <= c, v = H(r,c).
/// Diagonal entries must be real. Tr(H X) = sum_diag v*X_rr + sum_off 2*Re(v*conj(X_rc)).
struct CxEntry {
  int r, c;
  Complex v;
};

/// One upper-triangle entry of a real symmetric coefficient: r <= c, v = A(r,c).
/// <A, S> = sum_diag v*S_rr + sum_off 2*v*S_rc.
struct SymEntry {
  int r, c;
  double v;
};

enum class RowKind { Eq, Le };

/// Complex-level block-structured program: one Hermitian PSD matrix per slot,
/// auxiliary real 2x2 PSD blocks (one per matrix-inequality reformulation),
/// and nonnegative scalars. Rows are linear in all of them.
struct HermitianProgram {
  int n = 0;  // Hermitian block dimension (shared by all slots)
  int T = 0;

  struct Scalar {
    std::string name;
    int group = -1;  // owning slot, -1 = cross-slot
  };
  std::vector<Scalar> scalars;
  std::vector<int> aux_group;  // per auxiliary 2x2 block: owning slot

  struct Row {
    std::vector<std::pair<int, std::vector<CxEntry>>> cx;  // (slot, Hermitian coeff)
    std::vector<std::pair<int, RMat>> aux;                  // (aux block, sym 2x2 coeff)
    std::vector<std::pair<int, double>> lin;                // (scalar, coeff)
    double rhs = 0.0;
    RowKind kind = RowKind::Eq;
    std::string tag;
    int group = -1;
  };
  std::vector<Row> rows;

  std::vector<CMat> obj;                          // per slot, Hermitian
  std::vector<std::pair<int, double>> obj_lin;    // scalar terms

  // scalar index of each elastic power by (load, slot); -1 outside the window.
  // Indices stay valid in the lowered program: real_embedding copies scalars
  // in order and appends inequality slacks after them.
  std::vector<std::vector<int>> pbar;

  int add_scalar(std::string name, int group) {
    scalars.push_back({std::move(name), group});
    return static_cast<int>(scalars.size()) - 1;
  }
  int add_aux_block(int group) {
    aux_group.push_back(group);
    return static_cast<int>(aux_group.size()) - 1;
  }
  int count_rows(const std::string& tag) const;
};

/// Real block-structured conic program in pure equality form:
///   min <C, S> + c.x   s.t.  <A_i, S> + a_i.x = b_i,  S in PSD blocks, x >= 0.
/// Blocks flagged `embedded` came from a Hermitian matrix of half the
/// dimension; their iterates live on the invariant subspace S11 = S22,
/// S12 = -S21, which the solver preserves by projection (any feasible point
/// can be averaged onto it without changing objective or residuals).
struct ConicProgram {
  struct Block {
    int dim = 0;
    bool embedded = false;
    int group = -1;
  };
  std::vector<Block> blocks;

  struct Scalar {
    std::string name;
    int group = -1;
  };
  std::vector<Scalar> scalars;

  struct Term {
    int block = -1;
    std::vector<SymEntry> entries;
  };
  struct Row {
    std::vector<Term> terms;
    std::vector<std::pair<int, double>> lin;
    double rhs = 0.0;
    int group = -1;
    std::string tag;
  };
  std::vector<Row> rows;

  std::vector<Term> obj_blocks;  // at most one term per block
  std::vector<std::pair<int, double>> obj_lin;
};

/// Dense complex-to-real lift of one Hermitian matrix:
///   M(H) = [[Re H, -Im H], [Im H, Re H]],   Tr(H X) = 1/2 Tr(M(H) M(X)).
/// Throws InputError when H is not Hermitian (relative tolerance 1e-12).
RMat embed_matrix(const CMat& h);

/// Upper-triangle entries of (1/2) M(H) from upper-triangle Hermitian entries,
/// so <embedded coeff, S> == Tr(H X) without further scaling. Throws on a
/// non-real diagonal entry.
std::vector<SymEntry> embed_entries(const std::vector<CxEntry>& h, int n);

/// Lower the complex-level program onto real symmetric blocks: each slot
/// becomes one 2n x 2n PSD block flagged `embedded`, auxiliary 2x2 blocks and
/// scalars pass through, and every <= row gains a fresh slack scalar so only
/// equalities remain.
ConicProgram real_embedding(const HermitianProgram& hp);

/// Structural soundness: indices in range, entries upper-triangular, finite
/// values. Empty result = valid.
std::vector<std::string> validate_program(const ConicProgram& p);

/// Sparse text dump (one `block row col value` line per nonzero) with
/// objective / constraint / structure sections, for external cross-checks.
/// Structure rows spell out the embedded-block symmetry so the file is a
/// self-contained plain SDP.
void export_program(const ConicProgram& p, std::ostream& os);

// -- helpers shared by assembly, recovery, and tests ------------------------

/// Hermitian matrix from upper-triangle entries.
CMat cx_to_dense(const std::vector<CxEntry>& entries, int n);

/// Upper-triangle entries of a dense Hermitian matrix, exact zeros dropped.
std::vector<CxEntry> dense_to_cx(const CMat& h);

/// Tr(H X) for entry-form Hermitian H and dense Hermitian X (real by symmetry).
double herm_dot(const std::vector<CxEntry>& h, const CMat& x);

/// <A, S> for entry-form symmetric A and dense symmetric S.
double sym_dot(const std::vector<SymEntry>& a, const RMat& s);

/// Dense symmetric matrix from upper-triangle entries.
RMat sym_to_dense(const std::vector<SymEntry>& entries, int dim);

}  // namespace sdopf
