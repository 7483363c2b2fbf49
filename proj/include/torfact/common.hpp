// SPDX-License-Identifier: Apache-2.0
#ifndef TORFACT_COMMON_HPP
#define TORFACT_COMMON_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace torfact {

inline constexpr double kTau = 6.283185307179586476925286766559;  // 2*pi
inline constexpr double kPi = 3.1415926535897932384626433832795;

/// Pipeline stage tags carried by rejection errors, so a caller can tell
/// which part of a multi-stage computation refused its input.
enum class Stage {
  kInput,
  kSampling,
  kFlow,
  kInversion,
  kRectify,
  kLinearize,
  kSplit,
  kNeumann,
  kPullback,
  kFrame,
  kFixPoint,
  kFragment,
  kSolve,
  kAssemble,
};

inline const char* stage_name(Stage s) {
  switch (s) {
    case Stage::kInput: return "input";
    case Stage::kSampling: return "sampling";
    case Stage::kFlow: return "flow";
    case Stage::kInversion: return "inversion";
    case Stage::kRectify: return "rectify";
    case Stage::kLinearize: return "linearize";
    case Stage::kSplit: return "split";
    case Stage::kNeumann: return "neumann";
    case Stage::kPullback: return "pullback";
    case Stage::kFrame: return "frame";
    case Stage::kFixPoint: return "fix_point";
    case Stage::kFragment: return "fragment";
    case Stage::kSolve: return "solve";
    case Stage::kAssemble: return "assemble";
  }
  return "unknown";
}

/// Rejection with a stage tag.  Thrown whenever an operation's preconditions
/// or invariants fail; the pipeline aborts rather than proceeding silently.
class StageError : public std::runtime_error {
 public:
  StageError(Stage stage, const std::string& what)
      : std::runtime_error(std::string(stage_name(stage)) + ": " + what),
        stage_(stage) {}
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

using Pt = std::array<double, 2>;  // point or vector; [1] ignored when dim==1

/// Wrap an angle into [0, 2*pi).
inline double wrap_angle(double x) {
  double r = std::fmod(x, kTau);
  if (r < 0.0) r += kTau;
  // fmod can return kTau after the correction when x is a tiny negative.
  if (r >= kTau) r -= kTau;
  return r;
}

/// Wrap a displacement into (-pi, pi].
inline double wrap_delta(double d) {
  double r = std::fmod(d, kTau);
  if (r > kPi) r -= kTau;
  if (r <= -kPi) r += kTau;
  return r;
}

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace torfact

#endif  // TORFACT_COMMON_HPP
