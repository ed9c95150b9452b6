#pragma once

#include <fstream>
#include <string>

#include "catbench/study.hpp"

namespace testing_support {

inline catbench::json study_document(const std::string &study_id) {
  std::ifstream in(catbench::bundled_study_path(study_id));
  return catbench::json::parse(in);
}

}  // namespace testing_support
