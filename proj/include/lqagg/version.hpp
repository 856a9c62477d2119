#ifndef LQAGG_VERSION_HPP
#define LQAGG_VERSION_HPP

namespace lqagg {

inline constexpr const char* version_string = "lqagg 0.1.0";

} // namespace lqagg

#endif
