#pragma once

#include <memory>

#include "s2st/stages.hpp"

namespace s2st::stages {

std::shared_ptr<Backend> make_checkpoint_backend(const BackendDescriptor& descriptor,
                                                 std::shared_ptr<HubClient> hub);

}  // namespace s2st::stages
