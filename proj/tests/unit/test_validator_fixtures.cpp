#include <filesystem>
#include <fstream>

#include "aerocue/session_engine.hpp"
#include "test_support.hpp"

using namespace aerocue;

TEST_CASE("hand-built validator fixtures classify exactly") {
  const std::filesystem::path dir = std::filesystem::path(AEROCUE_FIXTURE_DIR) / "validator";
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  REQUIRE(files.size() >= 12);

  std::size_t pass = 0, fail_c1 = 0, fail_c2 = 0, fail_c3 = 0;
  for (const auto& f : files) {
    CAPTURE(f.filename().string());
    std::ifstream in(f);
    const Json j = Json::parse(in);
    const SessionRecord r = record_from_json(j.at("record"));
    const ValidatorVerdict v = validate_record(r.report, r.stages);
    const Json& want = j.at("expected");
    CHECK(v.c1 == want.at("c1").get<bool>());
    CHECK(v.c2 == want.at("c2").get<bool>());
    CHECK(v.c3 == want.at("c3").get<bool>());
    // Failing fixtures say why.
    CHECK(v.overall() == v.notes.empty());
    pass += v.overall();
    fail_c1 += !v.c1;
    fail_c2 += !v.c2;
    fail_c3 += !v.c3;
  }
  CHECK(pass >= 4);
  CHECK(files.size() - pass >= 8);
  CHECK(fail_c1 >= 2);
  CHECK(fail_c2 >= 2);
  CHECK(fail_c3 >= 2);
}
