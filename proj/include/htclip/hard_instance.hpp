#pragma once

#include "htclip/types.hpp"

namespace htclip {

enum class HardKind { cvx, str };

/// Parameters of a lower-bound instance built on the three-point law D_v.
///
/// Coordinate i of a draw is 0 w.p. 1 - q_i, +1 w.p. (1 + v_i theta_i) q_i / 2
/// and -1 otherwise. M and y vanish beyond the first d_star coordinates.
struct HardInstance {
  HardKind kind = HardKind::cvx;
  Index d = 0;
  Index d_star = 0;
  Vector v;
  Vector q;
  Vector theta;
  Vector M;
  Vector y;  // cvx only
  double mu = 0.0;  // str only
  Vector x_star;
  double F_star = 0.0;
};

}  // namespace htclip
