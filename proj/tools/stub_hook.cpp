// Copyright 2026 The BeamForge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Stand-in trainer for the progressive pipeline. It records each invocation
// and writes a small JSON "model" at --out so teacher/student chaining can be
// checked without a detector.
//
//   BEAMFORGE_STUB_LOG      append one line per invocation to this file
//   BEAMFORGE_STUB_FAIL_ON  exit 1 when the --data path contains this string

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "beamforge/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"beamforge stub trainer hook"};
  std::string teacher, data, out;
  app.add_option("--teacher", teacher, "teacher model reference")->required();
  app.add_option("--data", data, "stage dataset directory")->required();
  app.add_option("--out", out, "student model reference to produce")->required();
  CLI11_PARSE(app, argc, argv);

  if (const char* log = std::getenv("BEAMFORGE_STUB_LOG"); log && *log) {
    std::ofstream f(log, std::ios::app);
    f << "teacher=" << teacher << " data=" << data << " out=" << out << "\n";
  }
  if (const char* fail = std::getenv("BEAMFORGE_STUB_FAIL_ON"); fail && *fail && data.find(fail) != std::string::npos) {
    std::cerr << "stub hook: injected failure for " << data << "\n";
    return 1;
  }
  try {
    std::filesystem::create_directories(std::filesystem::path(out).parent_path());
    nlohmann::json model{{"teacher", teacher},
                         {"data", data},
                         {"scans", beamforge::list_scans(data).size()},
                         {"data_hash", beamforge::dataset_hash(data)}};
    std::ofstream(out) << model.dump(2) << "\n";
  } catch (const std::exception& e) {
    std::cerr << "stub hook: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
