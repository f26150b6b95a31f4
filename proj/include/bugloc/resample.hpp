#ifndef BUGLOC_RESAMPLE_HPP
#define BUGLOC_RESAMPLE_HPP

#include <vector>

#include <Eigen/Dense>

namespace bugloc {

struct ResampleConfig {
  enum class Policy { MeanOfTrainingLengths, Explicit };
  Policy policy = Policy::MeanOfTrainingLengths;
  Eigen::Index target_length = 0;  // used when policy == Explicit

  void validate() const;
};

// Fourier resampling of a real signal to `target_length` samples.
//
// The spectrum is truncated when shrinking and zero-padded when growing,
// with Hermitian symmetry preserved so the output stays real:
//  - shrinking to even length: the folded Nyquist bin is the sum of the
//    +N/2 and -N/2 source bins (real for real input);
//  - growing from even length: the source Nyquist bin is halved and
//    mirrored into the +N/2 and -N/2 target bins.
// The inverse transform is scaled by target_length / input_length, which
// preserves the signal mean exactly. The whole map is linear.
Eigen::VectorXd resample(const Eigen::Ref<const Eigen::VectorXd>& values,
                         Eigen::Index target_length);

// Rounded mean of the given lengths, floored at 2.
Eigen::Index mean_target_length(const std::vector<Eigen::Index>& lengths);

}  // namespace bugloc

#endif
