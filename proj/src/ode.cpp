#include "ahx/ode.hpp"

namespace ahx {

template class DormandPrince<double>;

}  // namespace ahx
