#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "readbench/errors.hpp"
#include "readbench/report.hpp"
#include "readbench/sweep.hpp"

using namespace readbench;

namespace {

RunRecord full_record(int i) {
  RunRecord r;
  r.workload.target = "sim:nvme \"quoted\"";
  r.workload.capacity = 1ULL << 40;
  r.workload.direct = i % 2;
  r.workload.pattern = i % 2 ? AccessPattern::Sequential : AccessPattern::Random;
  r.workload.block_size = 4096ULL << (i % 3);
  r.workload.threads = 1 + i;
  r.workload.warmup_s = 0.1 * i;
  if (i % 2) r.workload.duration_s = 2.5;
  else r.workload.request_budget = 1000 + i;
  r.workload.seed = 0xffffffffffffffffULL - i;
  r.workload.verify = true;
  r.workload.start_offset = 8192 * i;
  r.engine = {.kind = EngineKind::CompletionRing, .queue_size = 16, .batch_size = 2, .fixed_files = true,
              .fixed_buffers = i % 2 == 1, .kernel_poll = true};
  r.throughput_mbps = 1234.5678901234567 + i;
  r.latency = {.count = 99, .min_us = 3, .max_us = 900, .mean_us = 17.1 / 3, .p99_us = 40, .p999_us = 88};
  r.cpu = CpuUsage::from(0.1 + i, 0.2, 1.0 / 3);
  r.label = "U16B2F";
  r.started_at = "2026-01-02T03:04:05Z";
  r.notes = "stalls=2; line\nbreak, \"quote\"";
  r.diagnostics = {.requests = 99, .warmup_requests = 4, .bytes = 99 * 4096, .checksum = 0xdeadbeefcafef00dULL,
                   .blocks_verified = 103, .peak_outstanding = 16, .harvests = 50, .min_harvest = 2,
                   .stalls = 2, .polled_fallbacks = 0, .partial = i == 2};
  return r;
}

class Store : public ::testing::Test {
 protected:
  void SetUp() override {
    path_ = std::filesystem::temp_directory_path() /
            (std::string("readbench_store_") + ::testing::UnitTest::GetInstance()->current_test_info()->name() +
             ".jsonl");
    std::filesystem::remove(path_);
  }
  void TearDown() override { std::filesystem::remove(path_); }
  std::filesystem::path path_;
};

std::vector<RunRecord> campaign() {
  std::vector<RunRecord> rs;
  for (std::uint64_t block : {4096ULL, 65536ULL})
    for (std::uint32_t t : {1u, 2u})
      for (std::uint32_t q : {1u, 8u, 32u}) {
        WorkloadSpec w(Target::simulated(DeviceModel::preset(DeviceKind::NvmeSsd), 1));
        w.warmup_s = 0;
        w.with_requests(1500);
        w.block_size = block;
        w.threads = t;
        rs.push_back(run(w, {.kind = EngineKind::KernelAsyncQueue, .queue_size = q}));
      }
  return rs;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, sep);) out.push_back(item);
  return out;
}

}  // namespace

TEST_F(Store, RoundTripEveryField) {
  std::vector<RunRecord> rs{full_record(0), full_record(1), full_record(2)};
  rs[1].extra_json = R"({"host":"lab1","tags":[1,2]})";
  write_records(path_, rs);
  const auto back = read_records(path_);
  EXPECT_EQ(back.skipped, 0u);
  ASSERT_EQ(back.records.size(), 3u);
  for (std::size_t i = 0; i < rs.size(); ++i) {
    EXPECT_EQ(back.records[i].workload, rs[i].workload);
    EXPECT_EQ(back.records[i].engine, rs[i].engine);
    EXPECT_EQ(back.records[i].latency, rs[i].latency);
    EXPECT_EQ(back.records[i].cpu, rs[i].cpu);
    EXPECT_EQ(back.records[i].diagnostics, rs[i].diagnostics);
    EXPECT_EQ(back.records[i].notes, rs[i].notes);
    EXPECT_EQ(back.records[i].throughput_mbps, rs[i].throughput_mbps);
  }
  EXPECT_EQ(back.records[1].extra_json, rs[1].extra_json);
  EXPECT_EQ(back.records, rs);
  // Rewriting keeps unknown fields.
  EXPECT_EQ(record_to_json(back.records[1]), record_to_json(rs[1]));
}

TEST_F(Store, AppendsAcrossCalls) {
  const std::vector<RunRecord> a{full_record(0)}, b{full_record(1)};
  write_records(path_, a);
  write_records(path_, b);
  EXPECT_EQ(read_records(path_).records.size(), 2u);
}

TEST_F(Store, TruncatedFinalLine) {
  std::vector<RunRecord> rs{full_record(0), full_record(1), full_record(2), full_record(3)};
  write_records(path_, rs);
  const auto size = std::filesystem::file_size(path_);
  std::filesystem::resize_file(path_, size - 40);
  const auto back = read_records(path_);
  EXPECT_EQ(back.records.size(), 3u);
  EXPECT_EQ(back.skipped, 1u);
  ASSERT_EQ(back.warnings.size(), 1u);
  EXPECT_EQ(back.warnings[0].rfind("line 4", 0), 0u);
}

TEST_F(Store, EmptyAndMissing) {
  EXPECT_TRUE(read_records(path_).records.empty());
  std::ofstream(path_).close();
  const auto r = read_records(path_);
  EXPECT_TRUE(r.records.empty());
  EXPECT_EQ(r.skipped, 0u);
}

TEST(Json, RejectsGarbage) {
  EXPECT_THROW(record_from_json("{"), ConfigError);
  EXPECT_THROW(record_from_json("[]"), ConfigError);
  EXPECT_THROW(record_from_json(R"({"schema":1})"), ConfigError);
  std::istringstream in("not json\n\n" + record_to_json(full_record(0)) + "\n");
  const auto r = read_records(in);
  EXPECT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.skipped, 1u);
}

TEST(FormatDouble, RoundTrips) {
  for (double v : {0.0, 1.0 / 3, 1e-300, 12345.678, 2.5})
    EXPECT_EQ(std::stod(format_double(v)), v);
  EXPECT_EQ(format_double(2.5), "2.5");
}

TEST(Scatter, OneRecordOneMarker) {
  const std::vector<RunRecord> rs{full_record(0)};
  const auto svg = scatter_summary(rs);
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_NE(svg.find("<svg xmlns"), std::string::npos);
  std::size_t groups = 0;
  for (auto pos = svg.find("<g class=\"point"); pos != std::string::npos; pos = svg.find("<g class=\"point", pos + 1))
    ++groups;
  EXPECT_EQ(groups, 1u);
  EXPECT_NE(svg.find(">U16B2F</text>"), std::string::npos);
  EXPECT_THROW(scatter_summary(std::span<const RunRecord>{}), ConfigError);
}

TEST(Scatter, CpuLevelsAreDistinctAndLegendPresent) {
  auto a = full_record(0), b = full_record(0);
  a.cpu.percent_of_core = 20;
  b.cpu.percent_of_core = 300;
  const std::vector<RunRecord> rs{a, b};
  const auto pts = scatter_points(rs);
  EXPECT_NE(pts[0].fill, pts[1].fill);
  const auto svg = scatter_summary(rs);
  EXPECT_NE(svg.find("class=\"legend\""), std::string::npos);
  EXPECT_NE(svg.find(pts[0].fill), std::string::npos);
  EXPECT_NE(svg.find(pts[1].fill), std::string::npos);
}

TEST(Scatter, BestPerBlockMatchesSelectBest) {
  const auto rs = campaign();
  for (double budget : {std::numeric_limits<double>::infinity(), 150.0, 1.0}) {
    const auto pts = scatter_points(rs, {.p999_budget_us = budget});
    std::set<std::uint64_t> blocks;
    for (const auto& r : rs) blocks.insert(r.workload.block_size);
    std::set<std::size_t> expected, actual;
    for (auto b : blocks) {
      std::vector<RunRecord> group;
      for (const auto& r : rs)
        if (r.workload.block_size == b) group.push_back(r);
      const auto& best = select_best(group, budget);
      for (std::size_t i = 0; i < rs.size(); ++i)
        if (rs[i] == best) {
          expected.insert(i);
          break;
        }
    }
    for (const auto& p : pts)
      if (p.best) actual.insert(p.record);
    EXPECT_EQ(actual, expected);
    std::set<std::string> shapes;
    for (const auto& p : pts) shapes.insert(p.shape);
    EXPECT_EQ(shapes.size(), blocks.size());
  }
}

TEST(Scatter, Deterministic) {
  const auto rs = campaign();
  EXPECT_EQ(scatter_summary(rs), scatter_summary(campaign()));
  EXPECT_EQ(scatter_points_csv(rs), scatter_points_csv(rs));
  const auto lines = split(scatter_points_csv(rs), '\n');
  EXPECT_EQ(lines[0], "label,block_size,throughput_mbps,p999_us,cpu_percent,shape,fill,best");
  EXPECT_EQ(lines.size(), rs.size() + 1);
}

TEST(Table, ReparseEqualsSourceAndSorted) {
  auto rs = campaign();
  std::reverse(rs.begin(), rs.end());
  const auto lines = split(latency_table(rs), '\n');
  ASSERT_EQ(lines.size(), rs.size() + 1);
  EXPECT_EQ(lines[0], "block_size,label,count,min_us,mean_us,p99_us,p999_us,max_us,throughput_mbps");
  std::vector<std::pair<std::uint64_t, std::string>> keys;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i], ',');
    ASSERT_EQ(f.size(), 9u);
    keys.emplace_back(std::stoull(f[0]), f[1]);
    const auto it = std::find_if(rs.begin(), rs.end(), [&](const RunRecord& r) {
      return r.workload.block_size == keys.back().first && r.label == f[1];
    });
    ASSERT_NE(it, rs.end());
    EXPECT_EQ(std::stoull(f[2]), it->latency.count);
    EXPECT_EQ(std::stoull(f[3]), it->latency.min_us);
    EXPECT_EQ(std::stod(f[4]), it->latency.mean_us);
    EXPECT_EQ(std::stoull(f[5]), it->latency.p99_us);
    EXPECT_EQ(std::stoull(f[6]), it->latency.p999_us);
    EXPECT_EQ(std::stoull(f[7]), it->latency.max_us);
    EXPECT_EQ(std::stod(f[8]), it->throughput_mbps);
  }
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
  const std::vector<RunRecord> one{rs[0]};
  EXPECT_EQ(split(latency_table(one), '\n').size(), 2u);
}
