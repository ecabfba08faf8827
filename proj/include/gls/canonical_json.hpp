#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include <json.hpp>

#include "gls/error.hpp"

namespace gls {

using Json = nlohmann::json;

namespace detail {

inline void canonical_dump_into(const Json& j, std::string& out) {
  switch (j.type()) {
    case Json::value_t::object: {
      // nlohmann::json objects are std::map backed, so iteration is key-sorted.
      out.push_back('{');
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out.push_back(',');
        first = false;
        out += Json(it.key()).dump();
        out.push_back(':');
        canonical_dump_into(it.value(), out);
      }
      out.push_back('}');
      break;
    }
    case Json::value_t::array: {
      out.push_back('[');
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i != 0) out.push_back(',');
        canonical_dump_into(j[i], out);
      }
      out.push_back(']');
      break;
    }
    case Json::value_t::number_float: {
      double v = j.get<double>();
      if (!std::isfinite(v)) throw Error(ErrorKind::Validation, "non-finite number in canonical JSON");
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6f", v);
      // "-0.000000" and "0.000000" must not both be representable.
      std::string s = buf;
      if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
      out += s;
      break;
    }
    default:
      out += j.dump(-1, ' ', false, Json::error_handler_t::strict);
  }
}

}  // namespace detail

/// Sorted keys, no insignificant whitespace, floats with exactly six
/// fractional digits. Integers stay integers.
inline std::string canonical_dump(const Json& j) {
  std::string out;
  detail::canonical_dump_into(j, out);
  return out;
}

}  // namespace gls
