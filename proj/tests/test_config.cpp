#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "rtd/config.hpp"

using namespace rtd;

namespace {

std::string message_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const std::invalid_argument& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, EmptyFileGivesHummingbirdDefaults) {
  const Config c = parse_config("");
  EXPECT_EQ(c.quad.mass, 0.547);
  EXPECT_EQ(c.quad.inertia, Vec3(0.0033, 0.0033, 0.0058));
  EXPECT_EQ(c.quad.k_tau, 1.5e-7);
  EXPECT_EQ(c.quad.k_mu, 3.75e-9);
  EXPECT_EQ(c.quad.arm, 0.27);
  EXPECT_EQ(c.quad.rotor_min, 1100.0);
  EXPECT_EQ(c.quad.rotor_max, 8600.0);
  EXPECT_EQ(c.gx, 2.0);
  EXPECT_EQ(c.gv, 0.5);
  EXPECT_EQ(c.gr, 1.0);
  EXPECT_EQ(c.gw, 0.03);
  EXPECT_EQ(c.v_max, 5.0);
  EXPECT_EQ(c.a_max, 3.0);
  EXPECT_EQ(c.d_sense, 12.0);
  EXPECT_EQ(c.timing.t_plan, 0.75);
  EXPECT_EQ(c.timing.t_pk, 1.0);
  EXPECT_EQ(c.timing.t_fin, 3.0);
  EXPECT_EQ(c.bounds.v, 5.0);
  EXPECT_EQ(c.bounds.a, 10.0);
  EXPECT_EQ(c.bounds.pk, 5.0);
  EXPECT_EQ(c.body().half_extents, Vec3::Constant(0.27));
}

TEST(Config, CommentsAndWhitespace) {
  const Config c = parse_config("# desk run\n\n  v_max = 4   # slower\nseed=7\r\ndeterministic = false\n");
  EXPECT_EQ(c.v_max, 4.0);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_FALSE(c.deterministic);
}

TEST(Config, RejectsUnknownKeysWithLineNumber) {
  const std::string m = message_of("mass = 0.5\n\nmsas = 0.6\n");
  EXPECT_NE(m.find("line 3"), std::string::npos) << m;
  EXPECT_NE(m.find("msas"), std::string::npos) << m;
  EXPECT_NE(message_of("mass 0.5\n").find("key = value"), std::string::npos);
  EXPECT_NE(message_of("mass = heavy\n").find("mass"), std::string::npos);
  EXPECT_NE(message_of("num_samples = 1.5\n").find("num_samples"), std::string::npos);
  EXPECT_NE(message_of("deterministic = maybe\n").find("deterministic"), std::string::npos);
}

TEST(Config, CrossFieldValidation) {
  EXPECT_FALSE(message_of("t_pk = 4\n").empty());
  EXPECT_FALSE(message_of("t_plan = 1.5\n").empty());
  EXPECT_NE(message_of("d_sense = 3\n").find("d_sense"), std::string::npos);
  EXPECT_NE(message_of("a_max = 10\n").find("a_max"), std::string::npos);
  EXPECT_NE(message_of("dt_sim = 0.007\n").find("dt_sim"), std::string::npos);
  EXPECT_FALSE(message_of("err_dv = 0\n").empty());
  EXPECT_FALSE(message_of("v_max = 6\n").empty());
}

TEST(Config, SenseHorizonCoversStopping) {
  // braking from 5 m/s over the second segment plus one planning period at full speed
  const Config c;
  const double need = stopping_distance(c.timing, c.v_max) + c.v_max * c.timing.t_plan;
  EXPECT_NEAR(stopping_distance(c.timing, 5.0), 5.0, 1e-12);
  EXPECT_LE(need, c.d_sense);
}

TEST(Config, DumpParseRoundTrip) {
  Config c = parse_config("mass = 0.6\ngx = 2.5\nhorizon_check = false\nn_obstacles = 30\nseed = 123\nerr_dv = 1.4\n");
  const Config back = parse_config(dump_config(c));
  EXPECT_EQ(dump_config(back), dump_config(c));
  EXPECT_EQ(back.quad.mass, 0.6);
  EXPECT_EQ(back.world.num_obstacles, 30);
  EXPECT_FALSE(back.horizon_check);
  EXPECT_EQ(back.frs_hash(), c.frs_hash());
  EXPECT_EQ(back.table_hash(), c.table_hash());
}

TEST(Config, HashesTrackTheirFields) {
  const Config base;
  const Config frs_change = parse_config("frs_dt = 0.01\n");
  const Config table_change = parse_config("gx = 2.1\n");
  const Config policy_change = parse_config("goal_radius = 2\n");
  EXPECT_NE(frs_change.frs_hash(), base.frs_hash());
  EXPECT_EQ(frs_change.table_hash(), base.table_hash());
  EXPECT_NE(table_change.table_hash(), base.table_hash());
  EXPECT_EQ(table_change.frs_hash(), base.frs_hash());
  EXPECT_EQ(policy_change.frs_hash(), base.frs_hash());
  EXPECT_EQ(policy_change.table_hash(), base.table_hash());
}

TEST(Config, DerivedSettings) {
  const Config c = parse_config("deterministic = true\nerr_dv = 1.4\nerr_dt = 0.1\n");
  EXPECT_LE(c.planner().budget.wall_seconds, 0.0);
  EXPECT_EQ(c.cover_spec().dv, 1.4);
  EXPECT_EQ(c.cover_spec().t_fin, 3.0);
  EXPECT_EQ(c.table_options().config_hash, c.table_hash());
  EXPECT_EQ(c.trial().constant_error, 0.1);
  EXPECT_EQ(parse_config("deterministic = false\n").planner().budget.wall_seconds, 0.75);
}

TEST(Config, LoadFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "rtd_test_config.cfg";
  {
    std::ofstream os(path);
    os << "v_max = 4.5\n";
  }
  EXPECT_EQ(load_config(path.string()).v_max, 4.5);
  std::filesystem::remove(path);
  EXPECT_THROW(load_config(path.string()), std::invalid_argument);
}
