#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "reslab/config.hpp"

using namespace reslab;

namespace {

ErrorCode code_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::NotConverged;
}

std::string message_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, Defaults) {
  const ExperimentConfig c = parse_config("");
  EXPECT_EQ(c.grid.dim, 1);
  EXPECT_EQ(c.grid.L, 20.0);
  EXPECT_EQ(c.grid.n, 4001);
  EXPECT_EQ(c.potential.family, "poschl_teller");
  EXPECT_EQ(c.nonlinearity.family, "arctan");
  EXPECT_EQ(c.spectral.lambda0, "value -1");
  EXPECT_FALSE(c.spectral.ceiling.has_value());
  EXPECT_EQ(c.experiment.seed, 0x5eedu);
  EXPECT_EQ(c.experiment.side, "below");
  EXPECT_EQ(c.experiment.points, 12);
  EXPECT_EQ(c.experiment.probe_radii, (std::vector<double>{1.0, 10.0, 100.0, 1000.0}));
  EXPECT_EQ(c.output.dir, "out");
  EXPECT_GE(c.effective_workers(), 1);
}

TEST(Config, ParsesAllSections) {
  const ExperimentConfig c = parse_config(R"(
; comment
[grid]
N = 2
L = 4
n = 81
[potential]
family = square_well
depth = -50
width = 1
offset = 0.5
[nonlinearity]
family = rational
amplitude = 2
width = 0.5
flip_half_line = true
[spectral]
ceiling = -1
lambda0 = index 1
delta = 0.25
morse_at = -3, -2.5
[experiment]
seed = 42
workers = 2
side = both
points = 6
u_cap = 1e8
probe_radii = 1 2 3
lambda = -4.1
dt = 1e-3
stop = equilibrium
snapshots = yes
tail_radii = 3,4
[output]
dir = results/run1
)");
  EXPECT_EQ(c.grid.dim, 2);
  EXPECT_EQ(c.grid.L, 4.0);
  EXPECT_EQ(c.grid.n, 81);
  EXPECT_EQ(c.potential.family, "square_well");
  EXPECT_EQ(c.potential.depth, -50.0);
  EXPECT_EQ(c.potential.offset, 0.5);
  EXPECT_EQ(c.nonlinearity.family, "rational");
  EXPECT_TRUE(c.nonlinearity.flip_half_line);
  EXPECT_EQ(*c.spectral.ceiling, -1.0);
  EXPECT_EQ(c.spectral.delta, 0.25);
  EXPECT_EQ(c.spectral.morse_at, (std::vector<double>{-3.0, -2.5}));
  EXPECT_EQ(c.experiment.seed, 42u);
  EXPECT_EQ(c.effective_workers(), 2);
  EXPECT_EQ(c.experiment.side, "both");
  EXPECT_EQ(*c.experiment.u_cap, 1e8);
  EXPECT_EQ(c.experiment.probe_radii, (std::vector<double>{1.0, 2.0, 3.0}));
  EXPECT_EQ(*c.experiment.lambda, -4.1);
  EXPECT_EQ(*c.experiment.dt, 1e-3);
  EXPECT_EQ(c.experiment.stop, "equilibrium");
  EXPECT_TRUE(c.experiment.snapshots);
  EXPECT_EQ(c.experiment.tail_radii, (std::vector<double>{3.0, 4.0}));
  EXPECT_EQ(c.output.dir, "results/run1");
}

TEST(Config, RejectsUnknownNames) {
  EXPECT_EQ(code_of("[grid]\nsize = 3\n"), ErrorCode::ConfigError);
  EXPECT_NE(message_of("[grid]\nsize = 3\n").find("unknown key 'size' in section [grid]"), std::string::npos);
  EXPECT_NE(message_of("[solver]\nx = 1\n").find("unknown section [solver]"), std::string::npos);
  EXPECT_NE(message_of("x = 1\n[grid]\nn = 5\n").find("outside a section"), std::string::npos);
}

TEST(Config, RejectsBadValues) {
  for (const char* text : {
           "[grid]\nN = 3\n", "[grid]\nL = -1\n", "[grid]\nn = 2\n", "[grid]\nn = 2.5\n", "[grid]\nL = abc\n",
           "[grid]\nL = nan\n", "[potential]\nfamily = harmonic\n", "[nonlinearity]\nfamily = cubic\n",
           "[nonlinearity]\nflip_half_line = maybe\n", "[spectral]\nlambda0 = 3\n", "[spectral]\nlambda0 = index -1\n",
           "[spectral]\ndelta = -1\n", "[experiment]\nside = left\n", "[experiment]\nwindow = 1\n",
           "[experiment]\nstop = never\n", "[experiment]\nseed = -4\n", "[experiment]\nprobe_radii = 1, x\n",
           "[experiment]\ndt = 0\n", "[output]\ndir =\n", "[grid\nn = 3\n"}) {
    EXPECT_EQ(code_of(text), ErrorCode::ConfigError) << text;
  }
}

TEST(Config, Lambda0Selector) {
  const auto a = parse_lambda0_selector("index 0");
  EXPECT_TRUE(a.by_index);
  EXPECT_EQ(a.index, 0);
  const auto b = parse_lambda0_selector("value -4.5");
  EXPECT_FALSE(b.by_index);
  EXPECT_EQ(b.value, -4.5);
  EXPECT_THROW(parse_lambda0_selector("value"), Error);
  EXPECT_THROW(parse_lambda0_selector("value 1 2"), Error);
  EXPECT_THROW(parse_lambda0_selector("nearest 1"), Error);
}

TEST(Config, RoundTrip) {
  ExperimentConfig c = parse_config("[grid]\nn = 101\n[spectral]\nmorse_at = -2\n[experiment]\nlambda = -1.3\n");
  const std::string ini = to_ini(c);
  const ExperimentConfig d = parse_config(ini);
  EXPECT_EQ(to_ini(d), ini);
  EXPECT_EQ(d.grid.n, 101);
  EXPECT_EQ(*d.experiment.lambda, -1.3);
  EXPECT_FALSE(d.experiment.dt.has_value());
  EXPECT_EQ(d.spectral.morse_at, std::vector<double>{-2.0});
}

TEST(Config, LoadPrefixesPath) {
  const auto path = std::filesystem::temp_directory_path() / "reslab_bad_config.ini";
  {
    std::ofstream out(path);
    out << "[grid]\nn = 1\n";
  }
  try {
    load_config(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
    EXPECT_NE(std::string(e.what()).find(path.string()), std::string::npos);
  }
  std::filesystem::remove(path);
  EXPECT_THROW(load_config(path), Error);
}
