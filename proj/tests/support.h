#pragma once

#include <stdexcept>
#include <string>

#include "clustersim/assembler.h"
#include "clustersim/cluster.h"

namespace testing {

inline csim::Program must_assemble(const std::string& src, const csim::ClusterConfig& cfg = {}) {
  auto r = csim::assemble(src, csim::AsmOptions::from(cfg));
  if (!r.ok()) {
    std::string msg;
    for (const auto& e : r.errors) msg += e.to_string() + "\n";
    throw std::runtime_error(msg);
  }
  return *r.program;
}

// Same instructions and data image, spans ignored.
inline bool same_stream(const csim::Program& a, const csim::Program& b) {
  if (a.text.size() != b.text.size() || a.text_base != b.text_base || a.entry != b.entry) return false;
  for (size_t i = 0; i < a.text.size(); ++i) {
    if (!a.text[i].same_as(b.text[i])) return false;
  }
  if (a.data.size() != b.data.size()) return false;
  for (size_t i = 0; i < a.data.size(); ++i) {
    if (a.data[i].region != b.data[i].region || a.data[i].base != b.data[i].base ||
        a.data[i].bytes != b.data[i].bytes) {
      return false;
    }
  }
  return true;
}

}  // namespace testing
