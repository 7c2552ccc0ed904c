#include "iconnet/firconv.hpp"

#include <iomanip>
#include <ostream>

namespace iconnet {

void write_response_csv(std::ostream& out, const FrequencyResponse& response, double sample_rate) {
  out << "freq_normalized,freq_hz,magnitude_db\n";
  const auto old_flags = out.flags();
  const auto old_precision = out.precision();
  out << std::setprecision(9);
  for (std::size_t j = 0; j < response.freqs.size(); ++j) {
    out << response.freqs[j] << ',' << response.freqs[j] * sample_rate << ','
        << response.magnitude_db[j] << '\n';
  }
  out.flags(old_flags);
  out.precision(old_precision);
}

}  // namespace iconnet
