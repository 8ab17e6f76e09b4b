#include "aunet/tensor.hpp"

#include <sstream>

namespace aunet {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index e : shape) n *= e;
  return shape.empty() ? 0 : n;
}

}  // namespace aunet
