#include "distort/homography.hpp"

#include <cmath>

namespace xstab {

Homography solve_homography(const std::array<Vec2, 4>& src, const std::array<Vec2, 4>& dst) {
  // For each correspondence (u,v) -> (u',v'):
  //   u' = (a u + b v + c) / (g u + h v + 1)
  //   v' = (d u + e v + f) / (g u + h v + 1)
  // giving two linear rows in (a..h).
  double A[8][9] = {};
  for (int i = 0; i < 4; ++i) {
    const double u = src[i].u, v = src[i].v;
    const double up = dst[i].u, vp = dst[i].v;
    double* r0 = A[2 * i];
    double* r1 = A[2 * i + 1];
    r0[0] = u; r0[1] = v; r0[2] = 1; r0[6] = -u * up; r0[7] = -v * up; r0[8] = up;
    r1[3] = u; r1[4] = v; r1[5] = 1; r1[6] = -u * vp; r1[7] = -v * vp; r1[8] = vp;
  }

  // Gaussian elimination with partial pivoting.
  for (int col = 0; col < 8; ++col) {
    int piv = col;
    for (int r = col + 1; r < 8; ++r)
      if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
    if (std::abs(A[piv][col]) < 1e-12)
      fail(Err::DegenerateQuad, "solve_homography: singular system");
    if (piv != col)
      for (int c = 0; c < 9; ++c) std::swap(A[piv][c], A[col][c]);
    for (int r = col + 1; r < 8; ++r) {
      const double f = A[r][col] / A[col][col];
      for (int c = col; c < 9; ++c) A[r][c] -= f * A[col][c];
    }
  }
  double x[8];
  for (int row = 7; row >= 0; --row) {
    double s = A[row][8];
    for (int c = row + 1; c < 8; ++c) s -= A[row][c] * x[c];
    x[row] = s / A[row][row];
  }

  Homography H;
  H.h = {{{x[0], x[1], x[2]}, {x[3], x[4], x[5]}, {x[6], x[7], 1.0}}};
  return H;
}

}  // namespace xstab
