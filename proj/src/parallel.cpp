#include "sneuron/parallel.hpp"

namespace sneuron {

std::size_t default_workers() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

} // namespace sneuron
