#include <gtest/gtest.h>

#include <fstream>
#include <memory>
#include <sstream>

#include "test_support.hpp"

using namespace melanin;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "melanin");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string t; std::getline(in, t, sep);) out.push_back(t);
  return out;
}

// One synthetic 10 x 5 VL dataset and its enrolment, shared by the suite.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = std::make_unique<TempDir>("cli");
    const Result s = run_cli({"synth", "--classes", "10", "--images", "5", "--seed", "3", "--out",
                              data().string()});
    ASSERT_EQ(s.code, 0) << s.err;
    const Result e = run_cli({"enroll", "--manifest", manifest().string(), "--seed", "3", "--out",
                              gallery().string(), "--threads", "2"});
    ASSERT_EQ(e.code, 0) << e.err;
  }
  static void TearDownTestSuite() { root_.reset(); }

  static fs::path data() { return root_->path() / "data"; }
  static fs::path manifest() { return data() / "manifest.json"; }
  static fs::path gallery() { return root_->path() / "gallery"; }
  static fs::path scratch(const std::string& name) { return root_->path() / name; }

  static std::unique_ptr<TempDir> root_;
};

std::unique_ptr<TempDir> CliTest::root_;

}  // namespace

TEST_F(CliTest, SynthWritesDataset) {
  EXPECT_EQ(load_manifest(manifest()).entries.size(), 50u);
  EXPECT_TRUE(fs::exists(data() / "S010_L_VL_4.png"));
}

TEST_F(CliTest, EnrollWritesOneCodePerImage) {
  int codes = 0;
  for (const auto& de : fs::directory_iterator(gallery())) {
    if (de.path().extension() != ".shpc") continue;
    ++codes;
    EXPECT_EQ(fs::file_size(de.path()), 2420u) << de.path();
  }
  EXPECT_EQ(codes, 50);
  const auto log = nlohmann::json::parse(slurp(gallery() / "enrollment_log.json"));
  EXPECT_EQ(log["enrolled"], 50);
  EXPECT_EQ(log["failed"], 0);
  EXPECT_EQ(log["seed"], 3);
  EXPECT_EQ(log["config"]["lambda"], 0.8);
  EXPECT_EQ(log["entries"][0]["code"], "S001_L_VL_0.shpc");
}

TEST_F(CliTest, EnrollIsReproducible) {
  const fs::path again = scratch("gallery_again");
  const Result e = run_cli({"enroll", "--manifest", manifest().string(), "--seed", "3", "--out",
                            again.string(), "--threads", "1"});
  ASSERT_EQ(e.code, 0) << e.err;
  for (const auto& de : fs::directory_iterator(gallery())) {
    if (de.path().extension() != ".shpc") continue;
    EXPECT_EQ(slurp(de.path()), slurp(again / de.path().filename())) << de.path();
  }
}

TEST_F(CliTest, EnrollEmptyManifestIsDataError) {
  const fs::path dir = scratch("empty");
  fs::create_directories(dir);
  write_text_atomic(dir / "manifest.json", "[]\n");
  const Result r = run_cli({"enroll", "--manifest", (dir / "manifest.json").string(), "--out", dir.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("no entries"), std::string::npos) << r.err;
}

TEST_F(CliTest, EnrollMissingManifestIsDataError) {
  const Result r = run_cli({"enroll", "--manifest", (scratch("nope") / "m.json").string()});
  EXPECT_EQ(r.code, 2);
}

TEST_F(CliTest, EnrollReportsPartialFailure) {
  const fs::path dir = scratch("partial");
  fs::create_directories(dir);
  DatasetManifest m = load_manifest(manifest());
  m.entries.resize(5);
  for (auto& e : m.entries) e.path = (data() / e.path).string();
  m.entries[1].path = (dir / "missing.png").string();
  save_manifest(m, dir / "manifest.json");
  const Result r = run_cli({"enroll", "--manifest", (dir / "manifest.json").string(), "--out",
                            (dir / "out").string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("missing.png"), std::string::npos);
  const auto log = nlohmann::json::parse(slurp(dir / "out" / "enrollment_log.json"));
  EXPECT_EQ(log["failed"], 1);
}

TEST_F(CliTest, MatchSelfRanksFirst) {
  const Result r = run_cli({"match", (gallery() / "S007_L_VL_2.shpc").string(), gallery().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 12u);  // comment, header, 10 subjects
  EXPECT_EQ(ls[0], "# seed=0 align=off");
  EXPECT_EQ(ls[1], "rank\tsubject\thd\tshift");
  EXPECT_EQ(ls[2], "1\tS007_L\t0.001250\t0");
}

TEST_F(CliTest, MatchRecaptureRanksFirst) {
  const Result r = run_cli({"match", (gallery() / "S004_L_VL_4.shpc").string(), gallery().string(), "--top", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 3u);
  // Its own file is in the gallery, so check a gallery without it.
  const fs::path g = scratch("gallery_minus");
  fs::create_directories(g);
  for (const auto& de : fs::directory_iterator(gallery())) {
    if (de.path().extension() == ".shpc" && de.path().filename() != "S004_L_VL_4.shpc") {
      fs::copy_file(de.path(), g / de.path().filename(), fs::copy_options::overwrite_existing);
    }
  }
  const Result r2 = run_cli({"match", (gallery() / "S004_L_VL_4.shpc").string(), g.string(), "--top", "1"});
  ASSERT_EQ(r2.code, 0) << r2.err;
  EXPECT_EQ(split(lines(r2.out)[2], '\t')[1], "S004_L");
}

TEST_F(CliTest, MatchSingleEntryGallery) {
  const fs::path g = scratch("gallery_one");
  fs::create_directories(g);
  fs::copy_file(gallery() / "S002_L_VL_0.shpc", g / "S002_L_VL_0.shpc", fs::copy_options::overwrite_existing);
  const Result r = run_cli({"match", (gallery() / "S001_L_VL_0.shpc").string(), g.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 3u);
  EXPECT_EQ(split(ls[2], '\t')[1], "S002_L");
}

TEST_F(CliTest, MatchDimensionMismatchNamesFile) {
  const fs::path g = scratch("gallery_mixed");
  fs::create_directories(g);
  fs::copy_file(gallery() / "S002_L_VL_0.shpc", g / "S002_L_VL_0.shpc", fs::copy_options::overwrite_existing);
  ShapeCode odd;
  odd.m = 24;
  odd.n = 50;
  odd.b = 8;
  odd.values.assign(24 * 50, 7);
  save_code(odd, g / "odd_one.shpc");
  const Result r = run_cli({"match", (gallery() / "S001_L_VL_0.shpc").string(), g.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("odd_one.shpc"), std::string::npos) << r.err;
}

TEST_F(CliTest, MatchCorruptProbeIsDataError) {
  const fs::path dir = scratch("corrupt");
  fs::create_directories(dir);
  auto bytes = read_file(gallery() / "S001_L_VL_0.shpc");
  bytes[200] ^= 0xFF;
  write_file_atomic(dir / "bad.shpc", bytes);
  const Result r = run_cli({"match", (dir / "bad.shpc").string(), gallery().string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("checksum"), std::string::npos) << r.err;
}

TEST_F(CliTest, ShiftAlignmentNeverIncreasesDistance) {
  const std::string probe = (gallery() / "S005_L_VL_1.shpc").string();
  const fs::path g = scratch("gallery_pair");
  fs::create_directories(g);
  fs::copy_file(gallery() / "S005_L_VL_3.shpc", g / "S005_L_VL_3.shpc", fs::copy_options::overwrite_existing);
  const Result off = run_cli({"match", probe, g.string()});
  const Result on = run_cli({"match", probe, g.string(), "--align", "shift"});
  ASSERT_EQ(off.code, 0);
  ASSERT_EQ(on.code, 0);
  EXPECT_EQ(lines(on.out)[0], "# seed=0 align=shift");
  const double hd_off = std::stod(split(lines(off.out)[2], '\t')[2]);
  const double hd_on = std::stod(split(lines(on.out)[2], '\t')[2]);
  EXPECT_LE(hd_on, hd_off);
  const int shift = std::stoi(split(lines(on.out)[2], '\t')[3]);
  EXPECT_LE(std::abs(shift), 10);
}

TEST_F(CliTest, ShiftAlignmentRecoversShiftedCode) {
  const ShapeCode a = load_code(gallery() / "S006_L_VL_0.shpc");
  const fs::path dir = scratch("shifted");
  fs::create_directories(dir / "g");
  save_code(a, dir / "g" / "S006_L_VL_0.shpc");
  save_code(shift_code(a, 4), dir / "probe.shpc");
  const Result off = run_cli({"match", (dir / "probe.shpc").string(), (dir / "g").string()});
  const Result on = run_cli({"match", (dir / "probe.shpc").string(), (dir / "g").string(), "--align", "shift"});
  ASSERT_EQ(on.code, 0) << on.err;
  EXPECT_EQ(lines(on.out)[2], "1\tS006_L\t0.001250\t4");
  EXPECT_GT(std::stod(split(lines(off.out)[2], '\t')[2]), 0.00125);
}

TEST_F(CliTest, InspectDumpsStages) {
  const DatasetManifest m = load_manifest(manifest());
  const IrisGeometry& geo = *m.entries[0].geometry;
  const fs::path dir = scratch("inspect");
  const Result r = run_cli({"inspect", (data() / m.entries[0].path).string(), "--cx", std::to_string(geo.center_x),
                            "--cy", std::to_string(geo.center_y), "--r-pupil", std::to_string(geo.pupil_radius),
                            "--r-iris", std::to_string(geo.iris_radius), "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (int b = 1; b <= 6; ++b) EXPECT_TRUE(fs::exists(dir / ("band_" + std::to_string(b) + ".pgm"))) << b;
  for (const char* f : {"strip.pgm", "enhanced.pgm", "filtered.pgm", "contours.pgm", "histogram.csv",
                        "inspect.json", "code.shpc"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const auto ls = lines(slurp(dir / "features.csv"));
  ASSERT_EQ(ls.size(), 25u);
  EXPECT_EQ(split(ls[0], ',').size(), 101u);
  EXPECT_EQ(split(ls[1], ',')[0], "RVF^1_1");
  for (std::size_t i = 1; i < ls.size(); ++i) EXPECT_EQ(split(ls[i], ',').size(), 101u) << i;
  const GrayImage strip = load_gray(dir / "strip.pgm");
  EXPECT_EQ(strip.width(), 300);
  EXPECT_EQ(strip.height(), 150);
  // Same image and geometry as the enrolment: same code.
  EXPECT_EQ(slurp(dir / "code.shpc"), slurp(gallery() / "S001_L_VL_0.shpc"));
}

TEST_F(CliTest, InspectPartialGeometryIsUsageError) {
  const Result r = run_cli({"inspect", (data() / "S001_L_VL_0.png").string(), "--cx", "100", "--out",
                            scratch("inspect_bad").string()});
  EXPECT_EQ(r.code, 1);
}

TEST_F(CliTest, EvaluateWritesReports) {
  const fs::path dir = scratch("eval");
  const Result r = run_cli({"evaluate", "--manifest", manifest().string(), "--k-train", "4", "--seed", "3",
                            "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"VL_4train.csv", "VL_4train_roc.csv", "VL_4train.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const auto j = nlohmann::json::parse(slurp(dir / "VL_4train.json"));
  EXPECT_GE(j["rank_accuracy"][0]["accuracy"].get<double>(), 0.9);
  EXPECT_EQ(j["comparisons_per_repetition"]["genuine"], 40);
  EXPECT_EQ(j["comparisons_per_repetition"]["impostor"], 360);
  EXPECT_EQ(j["scenario"]["repetitions"], 20);
  EXPECT_EQ(j["seed"], 3);
  const auto cmc = lines(slurp(dir / "VL_4train.csv"));
  ASSERT_EQ(cmc.size(), 11u);
  EXPECT_EQ(cmc[10].substr(0, 5), "10,1,");
  EXPECT_EQ(lines(slurp(dir / "VL_4train_roc.csv")).size(), 202u);
}

TEST_F(CliTest, EvaluateUsageErrors) {
  EXPECT_EQ(run_cli({"evaluate", "--manifest", manifest().string(), "--k-train", "5"}).code, 1);
  EXPECT_EQ(run_cli({"evaluate", "--manifest", manifest().string(), "--session", "UV"}).code, 1);
  EXPECT_EQ(run_cli({"evaluate", "--manifest", manifest().string(), "--reps", "0"}).code, 1);
}

TEST(Cli, FusedWithoutPairsIsDataError) {
  TempDir dir("cli_fused");
  ASSERT_EQ(run_cli({"synth", "--classes", "3", "--images", "3", "--sessions", "VL,NIR", "--out",
                     (dir / "data").string()})
                .code,
            0);
  DatasetManifest m = load_manifest(dir / "data" / "manifest.json");
  ASSERT_EQ(m.entries.size(), 18u);
  m.entries.pop_back();  // last NIR capture of the last class
  save_manifest(m, dir / "data" / "manifest.json");
  const Result r = run_cli({"evaluate", "--manifest", (dir / "data" / "manifest.json").string(), "--session",
                            "FUSED", "--k-train", "1", "--out", (dir / "out").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("paired"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 1);
  EXPECT_EQ(run_cli({"enroll"}).code, 1);
  EXPECT_EQ(run_cli({"match", "only_probe.shpc"}).code, 1);
  EXPECT_EQ(run_cli({"synth", "--lambda", "-1", "--out", "/nonexistent/x"}).code, 1);
  EXPECT_EQ(run_cli({"synth", "--sessions", "FUSED", "--out", "/nonexistent/x"}).code, 1);
  EXPECT_EQ(run_cli({"synth", "--unwrap-preset", "huge", "--out", "/nonexistent/x"}).code, 1);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(Cli, ConfigFileThenFlags) {
  TempDir dir("cli_config");
  write_text_atomic(dir / "cfg.json", R"({"lambda": 0.5, "bits": 6, "seed": 9})");
  cli::GlobalOptions g;
  g.config_path = (dir / "cfg.json").string();
  PipelineConfig cfg = cli::build_config(g);
  EXPECT_EQ(cfg.lambda, 0.5);
  EXPECT_EQ(cfg.bits, 6);
  EXPECT_EQ(cfg.seed, 9u);
  g.ov.lambda = 0.7;
  g.ov.unwrap_preset = "large";
  cfg = cli::build_config(g);
  EXPECT_EQ(cfg.lambda, 0.7);
  EXPECT_EQ(cfg.unwrap_rows, 256);
  EXPECT_EQ(cfg.unwrap_cols, 512);
  write_text_atomic(dir / "bad.json", R"({"lamda": 0.5})");
  g.config_path = (dir / "bad.json").string();
  EXPECT_THROW(cli::build_config(g), DataError);
  write_text_atomic(dir / "broken.json", "{");
  g.config_path = (dir / "broken.json").string();
  EXPECT_THROW(cli::build_config(g), DataError);
}

TEST(Cli, GalleryLabels) {
  EXPECT_EQ(cli::gallery_label("S001_L_VL_0.shpc"), "S001_L");
  EXPECT_EQ(cli::gallery_label("/x/sub_ject_R_NIR_12.shpc"), "sub_ject_R");
  EXPECT_EQ(cli::gallery_label("probe.shpc"), "probe");
  EXPECT_EQ(cli::gallery_label("a_X_VL_0.shpc"), "a_X_VL_0");
}

TEST(Cli, EnrollmentNamesCountPerStem) {
  DatasetManifest m;
  for (const char* s : {"A", "A", "B", "A"}) {
    ManifestEntry e;
    e.subject_id = s;
    e.path = "x.png";
    m.entries.push_back(e);
  }
  m.entries[1].session = Session::NIR;
  const auto names = cli::enrollment_names(m);
  EXPECT_EQ(names[0], "A_L_VL_0.shpc");
  EXPECT_EQ(names[1], "A_L_NIR_0.shpc");
  EXPECT_EQ(names[2], "B_L_VL_0.shpc");
  EXPECT_EQ(names[3], "A_L_VL_1.shpc");
}
