#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "edffd/image.hpp"
#include "edffd/image_io.hpp"
#include "edffd/params_json.hpp"
#include "edffd/sampling.hpp"
#include "edffd/synthetic.hpp"

namespace fs = std::filesystem;
using namespace edffd;

namespace {

int run(const std::string& args, std::string* out = nullptr) {
  const fs::path log = fs::temp_directory_path() / "edffd_cli_stdout.txt";
  const std::string cmd = std::string(EDFFD_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (out) {
    std::ifstream in(log);
    std::stringstream s;
    s << in.rdbuf();
    *out = s.str();
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("edffd_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(Cli, RegisterIdenticalReportsInfinitePsnr) {
  const fs::path d = fresh_dir("identical");
  io::write_image(d / "a.png", ProceduralTexture(2).render(96, 96, 3));
  ASSERT_EQ(run("register " + (d / "a.png").string() + " " + (d / "a.png").string() + " --out-dir " +
                (d / "out").string()),
            0);
  for (const char* f : {"warped.png", "mask.png", "composite.png", "params.json", "metrics.json"}) {
    EXPECT_TRUE(fs::exists(d / "out" / f)) << f;
  }
  const auto m = nlohmann::json::parse(slurp(d / "out" / "metrics.json"));
  EXPECT_EQ(m.at("psnr_db"), "inf");
  EXPECT_GT(m.at("inference_ms").get<double>(), 0.0);
  EXPECT_NEAR(m.at("inference_ms").get<double>() + m.at("warp_ms").get<double>(),
              m.at("total_ms").get<double>(), 1.0);
  const std::vector<std::string> keys{"psnr_db", "inference_ms", "warp_ms", "total_ms"};
  std::vector<std::string> order;
  const auto ordered = nlohmann::ordered_json::parse(slurp(d / "out" / "metrics.json"));
  for (auto it = ordered.begin(); it != ordered.end() && order.size() < 4; ++it) order.push_back(it.key());
  EXPECT_EQ(order, keys);
}

TEST(Cli, CompositeUsesWarpedRedAndReferenceGreenBlue) {
  const fs::path d = fresh_dir("composite");
  const ImageBuffer ref = ProceduralTexture(3).render(80, 80, 3);
  io::write_image(d / "ref.png", ref);
  ASSERT_EQ(run("register " + (d / "ref.png").string() + " " + (d / "ref.png").string() + " --out-dir " +
                d.string()),
            0);
  const ImageBuffer c = io::read_image(d / "composite.png");
  const ImageBuffer w = io::read_image(d / "warped.png");
  const ImageBuffer r = io::read_image(d / "ref.png");
  for (int y = 0; y < 80; y += 7)
    for (int x = 0; x < 80; x += 7) {
      EXPECT_EQ(c.at(x, y, 0), w.at(x, y, 0));
      EXPECT_EQ(c.at(x, y, 1), r.at(x, y, 1));
      EXPECT_EQ(c.at(x, y, 2), r.at(x, y, 2));
    }
}

TEST(Cli, MissingInputExitsTwoWithoutOutputs) {
  const fs::path d = fresh_dir("missing");
  std::string log;
  EXPECT_EQ(run("register " + (d / "nope.png").string() + " " + (d / "nope.png").string() + " --out-dir " +
                    (d / "out").string(),
                &log),
            2);
  EXPECT_FALSE(fs::exists(d / "out"));
  EXPECT_NE(log.find("nope.png"), std::string::npos);
}

TEST(Cli, RegistrationFailureExitsThreeNamingStage) {
  const fs::path d = fresh_dir("failure");
  io::write_image(d / "a.png", ProceduralTexture(1).render(128, 128, 1));
  io::write_image(d / "b.png", ImageBuffer(128, 128, 1, 0.5f));
  std::string log;
  const int code =
      run("register " + (d / "a.png").string() + " " + (d / "b.png").string() + " --out-dir " + d.string(), &log);
  if (code != 0) {
    EXPECT_EQ(code, 3);
    EXPECT_NE(log.find("stage"), std::string::npos) << log;
    EXPECT_FALSE(fs::exists(d / "params.json"));
  }
  io::write_image(d / "c.png", ImageBuffer(40, 40, 1, 0.5f));
  EXPECT_EQ(run("register " + (d / "c.png").string() + " " + (d / "c.png").string() + " --out-dir " + d.string()), 3);
}

TEST(Cli, WarpReplaysRegisterOutput) {
  const fs::path d = fresh_dir("replay");
  SyntheticSpec spec;
  spec.seed = 5;
  spec.width = spec.height = 128;
  spec.max_corner_motion = 6.0;
  const SyntheticPair p = make_synthetic_pair(spec);
  io::write_image(d / "ref.png", p.reference);
  io::write_image(d / "tgt.png", p.target);
  ASSERT_EQ(run("register " + (d / "ref.png").string() + " " + (d / "tgt.png").string() + " --out-dir " +
                d.string() + " --trace"),
            0);
  EXPECT_EQ(slurp(d / "trace.csv").rfind("stage,iteration,loss,step\n", 0), 0u);
  ASSERT_EQ(run("warp " + (d / "tgt.png").string() + " " + (d / "params.json").string() + " " +
                (d / "replay.png").string()),
            0);
  EXPECT_EQ(slurp(d / "replay.png"), slurp(d / "warped.png"));
}

TEST(Cli, WarpIdentityAndSchemaErrors) {
  const fs::path d = fresh_dir("warp");
  io::write_image(d / "src.png", ProceduralTexture(6).render(50, 40, 3));
  WarpParams id;
  id.width = 50;
  id.height = 40;
  std::ofstream(d / "id.json") << to_json(id);
  ASSERT_EQ(run("warp " + (d / "src.png").string() + " " + (d / "id.json").string() + " " + (d / "out.png").string()),
            0);
  EXPECT_EQ(slurp(d / "out.png"), slurp(d / "src.png"));

  const std::string text = to_json(id);
  std::ofstream(d / "bad.json") << text.substr(0, text.size() / 2);
  std::string log;
  EXPECT_EQ(run("warp " + (d / "src.png").string() + " " + (d / "bad.json").string() + " " +
                    (d / "bad.png").string(),
                &log),
            4);
  EXPECT_FALSE(fs::exists(d / "bad.png"));
  std::ofstream(d / "nokey.json") << R"({"model": "homography"})";
  EXPECT_EQ(run("warp " + (d / "src.png").string() + " " + (d / "nokey.json").string() + " " +
                    (d / "bad.png").string(),
                &log),
            4);
  EXPECT_NE(log.find("canvas"), std::string::npos) << log;
}

TEST(Cli, BenchCsv) {
  const fs::path d = fresh_dir("bench");
  ASSERT_EQ(run("bench --sizes 128 --grids 6x6,12x12 --repeats 3 --out " + (d / "b.csv").string()), 0);
  std::istringstream csv(slurp(d / "b.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "model,width,height,grid_m,grid_n,field_eval_ms,warp_ms,peak_bytes");
  std::map<std::string, std::vector<double>> field_ms;
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    ASSERT_EQ(cells.size(), 8u) << line;
    EXPECT_GT(std::stod(cells[5]), 0.0);
    EXPECT_GT(std::stod(cells[6]), 0.0);
    EXPECT_GT(std::stod(cells[7]), 0.0);
    field_ms[cells[0]].push_back(std::stod(cells[5]));
  }
  EXPECT_EQ(rows, 6);
  for (const char* m : {"bspline", "edffd"}) EXPECT_GT(field_ms[m][1], field_ms[m][0]) << m;
}

TEST(Cli, SelfcheckEmitThenRegister) {
  const fs::path d = fresh_dir("selfcheck");
  std::string log;
  ASSERT_EQ(run("selfcheck --quick --emit " + d.string(), &log), 0) << log;
  EXPECT_NE(log.find("selfcheck passed"), std::string::npos);
  ASSERT_EQ(run("register " + (d / "reference.png").string() + " " + (d / "target.png").string() +
                " --out-dir " + (d / "out").string()),
            0);
  const ImageBuffer ref = io::read_image(d / "reference.png");
  const ImageBuffer tgt = io::read_image(d / "target.png");
  const double before = psnr_masked(tgt, ref, Mask(ref.width(), ref.height(), 1.0f));
  const auto m = nlohmann::json::parse(slurp(d / "out" / "metrics.json"));
  EXPECT_GE(m.at("psnr_db").get<double>(), before + 10.0);

  const SamplingMap truth = sampling_map_from_params(params_from_json(slurp(d / "truth.json")));
  const SamplingMap got = sampling_map_from_params(params_from_json(slurp(d / "out" / "params.json")));
  const ImageBuffer mask_img = io::read_image(d / "out" / "mask.png");
  Mask interior(ref.width(), ref.height(), 0.0f);
  for (int y = 16; y < ref.height() - 16; ++y)
    for (int x = 16; x < ref.width() - 16; ++x) interior.at(x, y) = mask_img.at(x, y) > 0.5f ? 1.0f : 0.0f;
  EXPECT_LT(endpoint_error(got, truth, interior).mean, 1.0);
}

TEST(Cli, SelfcheckCatchesCorruptedBasis) {
  std::string log;
  EXPECT_EQ(run("selfcheck --quick --pairs 1 --inject-basis-fault", &log), 1);
  EXPECT_NE(log.find("FAIL  P1"), std::string::npos) << log;
  EXPECT_NE(log.find("FAIL  AC1"), std::string::npos) << log;
}

TEST(Cli, UsageErrors) {
  EXPECT_NE(run("register a.png"), 0);
  EXPECT_NE(run("register a.png b.png --grid 12by12"), 0);
  EXPECT_NE(run("register a.png b.png --model affine"), 0);
}
