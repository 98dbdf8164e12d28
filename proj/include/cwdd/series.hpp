#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cwdd/errors.hpp"

namespace cwdd {

// Ensemble-averaged signal against a scan abscissa.
struct TimeSeries {
  std::string abscissa_name = "t_us";  // column name with units
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> stderr_;
  std::size_t trajectories = 0;

  std::size_t size() const { return x.size(); }

  void validate() const {
    if (mean.size() != x.size() || stderr_.size() != x.size())
      throw ValidationError("TimeSeries: column lengths differ");
    for (double s : stderr_)
      if (!(s >= 0)) throw ValidationError("TimeSeries: negative standard error");
  }
};

}  // namespace cwdd
