#pragma once

// Default prompt texts compiled from assets/ at build time.

#include <string_view>

namespace revkit::assets {

extern const std::string_view guidelines_code;
extern const std::string_view guidelines_test;
extern const std::string_view guidelines_comment;
extern const std::string_view persona;
extern const std::string_view task;
extern const std::string_view chain_of_thought;
extern const std::string_view fact_judge;
extern const std::string_view similarity_judge;
extern const std::string_view noise_judge;

}  // namespace revkit::assets
