#include "mediaflow/canonical_json.hpp"

#include <cmath>
#include <cstdio>

namespace mediaflow {

namespace {

void write_number(std::string& out, double v) {
  if (!std::isfinite(v)) {
    out += "null";
    return;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  // "-0.000000" and "0.000000" must serialize identically.
  if (std::string_view(buf) == "-0.000000") {
    out += "0.000000";
    return;
  }
  out += buf;
}

void write(std::string& out, const Json& v, int indent, int depth) {
  auto newline = [&](int d) {
    if (indent < 0) return;
    out.push_back('\n');
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (v.type()) {
    case Json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out.push_back('{');
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {  // std::map: sorted keys
        if (!first) out.push_back(',');
        first = false;
        newline(depth + 1);
        out += Json(it.key()).dump();
        out.push_back(':');
        if (indent >= 0) out.push_back(' ');
        write(out, it.value(), indent, depth + 1);
      }
      newline(depth);
      out.push_back('}');
      return;
    }
    case Json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      out.push_back('[');
      bool first = true;
      for (const auto& e : v) {
        if (!first) out.push_back(',');
        first = false;
        newline(depth + 1);
        write(out, e, indent, depth + 1);
      }
      newline(depth);
      out.push_back(']');
      return;
    }
    case Json::value_t::number_float:
      write_number(out, v.get<double>());
      return;
    default:
      out += v.dump();
      return;
  }
}

}  // namespace

std::string canonical_dump(const Json& value) {
  std::string out;
  write(out, value, -1, 0);
  return out;
}

std::string canonical_dump_pretty(const Json& value) {
  std::string out;
  write(out, value, 2, 0);
  return out;
}

}  // namespace mediaflow
