#include "bugloc/resample.hpp"

#include <cmath>
#include <complex>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "bugloc/errors.hpp"

namespace bugloc {

void ResampleConfig::validate() const {
  if (policy == Policy::Explicit && target_length < 2)
    throw ConfigError("explicit target_length must be >= 2");
}

Eigen::VectorXd resample(const Eigen::Ref<const Eigen::VectorXd>& values,
                         Eigen::Index target_length) {
  const Eigen::Index n = values.size();
  const Eigen::Index m = target_length;
  if (n < 2) throw BadLength("resample input must have at least 2 samples");
  if (m < 2) throw BadLength("resample target length must be at least 2");

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> input(values.data(), values.data() + n);
  std::vector<std::complex<double>> spectrum(n);
  fft.fwd(spectrum, input);

  std::vector<std::complex<double>> target(m, {0.0, 0.0});
  const Eigen::Index shared = std::min(n, m);
  const Eigen::Index nyq = shared / 2 + 1;
  for (Eigen::Index k = 0; k < nyq; ++k) target[k] = spectrum[k];
  for (Eigen::Index k = nyq; k < shared; ++k)
    target[m - shared + k] = spectrum[n - shared + k];
  if (shared % 2 == 0) {
    if (m < n) {
      // fold the dropped -N/2 bin into the new Nyquist bin
      target[shared / 2] += spectrum[n - shared / 2];
    } else if (m > n) {
      // split the source Nyquist bin across +N/2 and -N/2
      target[shared / 2] *= 0.5;
      target[m - shared / 2] = target[shared / 2];
    }
  }

  std::vector<std::complex<double>> out(m);
  fft.inv(out, target);
  const double scale = static_cast<double>(m) / static_cast<double>(n);
  Eigen::VectorXd result(m);
  for (Eigen::Index i = 0; i < m; ++i) result[i] = out[i].real() * scale;
  return result;
}

Eigen::Index mean_target_length(const std::vector<Eigen::Index>& lengths) {
  if (lengths.empty()) throw EmptyInput("mean_target_length over empty set");
  double sum = 0.0;
  for (auto l : lengths) sum += static_cast<double>(l);
  auto rounded = static_cast<Eigen::Index>(
      std::llround(sum / static_cast<double>(lengths.size())));
  return std::max<Eigen::Index>(2, rounded);
}

}  // namespace bugloc
