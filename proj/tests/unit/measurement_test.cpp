#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "readbench/errors.hpp"
#include "readbench/measurement.hpp"

using namespace readbench;

namespace {

std::vector<LatencySample> from_durations(const std::vector<std::uint64_t>& d) {
  std::vector<LatencySample> out;
  for (auto v : d) out.push_back({v, 4096});
  return out;
}

// Sort-and-index oracle, written without the library's helpers.
std::uint64_t oracle_rank(std::vector<std::uint64_t> v, double q) {
  std::sort(v.begin(), v.end());
  std::size_t k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()) - 1e-9));
  if (k < 1) k = 1;
  return v[k - 1];
}

}  // namespace

TEST(Aggregate, ConstantDistribution) {
  const auto s = aggregate_latencies(from_durations(std::vector<std::uint64_t>(1000, 12000)));
  EXPECT_EQ(s.count, 1000u);
  EXPECT_EQ(s.min_us, 12000u);
  EXPECT_EQ(s.max_us, 12000u);
  EXPECT_DOUBLE_EQ(s.mean_us, 12000.0);
  EXPECT_EQ(s.p99_us, 12000u);
  EXPECT_EQ(s.p999_us, 12000u);
}

TEST(Aggregate, OneToThousand) {
  std::vector<std::uint64_t> d(1000);
  std::iota(d.begin(), d.end(), 1);
  const auto s = aggregate_latencies(from_durations(d));
  EXPECT_EQ(s.p99_us, 990u);
  // ceil(0.999 * 1000) = 999, so the 999th order statistic.
  EXPECT_EQ(s.p999_us, 999u);
  EXPECT_EQ(s.min_us, 1u);
  EXPECT_EQ(s.max_us, 1000u);
  EXPECT_DOUBLE_EQ(s.mean_us, 500.5);
}

TEST(Aggregate, SingleSample) {
  const auto s = aggregate_latencies(from_durations({7}));
  EXPECT_EQ(s.count, 1u);
  EXPECT_EQ(s.p99_us, 7u);
  EXPECT_EQ(s.p999_us, 7u);
}

TEST(Aggregate, EmptyThrows) {
  EXPECT_THROW(aggregate_latencies({}), EmptySampleSet);
}

TEST(Aggregate, MatchesOracleAndOrderings) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng() % 5000;
    std::vector<std::uint64_t> d(n);
    for (auto& v : d) v = rng() % 100000;
    const auto s = aggregate_latencies(from_durations(d));
    EXPECT_EQ(s.p99_us, oracle_rank(d, 0.99));
    EXPECT_EQ(s.p999_us, oracle_rank(d, 0.999));
    EXPECT_EQ(s.min_us, *std::min_element(d.begin(), d.end()));
    EXPECT_EQ(s.max_us, *std::max_element(d.begin(), d.end()));
    EXPECT_LE(s.min_us, s.p99_us);
    EXPECT_LE(s.p99_us, s.p999_us);
    EXPECT_LE(s.p999_us, s.max_us);
    EXPECT_LE(static_cast<double>(s.min_us), s.mean_us);
    EXPECT_LE(s.mean_us, static_cast<double>(s.max_us));

    std::shuffle(d.begin(), d.end(), rng);
    EXPECT_EQ(aggregate_latencies(from_durations(d)), s);
  }
}

TEST(NearestRank, IntegerArithmetic) {
  const std::vector<std::uint64_t> v{10, 20, 30, 40};
  EXPECT_EQ(nearest_rank(v, 1, 4), 10u);
  EXPECT_EQ(nearest_rank(v, 1, 2), 20u);
  EXPECT_EQ(nearest_rank(v, 51, 100), 30u);
  EXPECT_EQ(nearest_rank(v, 1, 1), 40u);
}

TEST(Throughput, Examples) {
  EXPECT_DOUBLE_EQ(compute_throughput(1'000'000, 1.0), 1.0);
  EXPECT_NEAR(compute_throughput(10'000'000'000'000ULL, 54000.0), 185.185, 0.01);
  EXPECT_THROW(compute_throughput(1, 0.0), InvalidInterval);
  EXPECT_THROW(compute_throughput(1, -1.0), InvalidInterval);
  EXPECT_DOUBLE_EQ(compute_throughput(2'000'000, 1.0), 2 * compute_throughput(1'000'000, 1.0));
  EXPECT_DOUBLE_EQ(compute_throughput(1'000'000, 2.0), compute_throughput(1'000'000, 1.0) / 2);
}

TEST(Cpu, Arithmetic) {
  const auto a = measure_cpu({1.0, 0.0}, {1.5, 0.0}, 1.0);
  EXPECT_DOUBLE_EQ(a.percent_of_core, 50.0);
  const auto b = measure_cpu({0.0, 2.0}, {0.2, 3.0}, 1.0);
  EXPECT_NEAR(b.percent_of_core, 120.0, 1e-9);
  EXPECT_NEAR(b.process_cpu, 0.2, 1e-12);
  EXPECT_NEAR(b.external_cpu, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(b.wall, 1.0);
  EXPECT_THROW(measure_cpu({1.0, 0.0}, {0.5, 0.0}, 1.0), ClockError);
  EXPECT_THROW(measure_cpu({0.0, 1.0}, {0.0, 0.5}, 1.0), ClockError);
  EXPECT_THROW(measure_cpu({0.0, 0.0}, {0.0, 0.0}, 0.0), InvalidInterval);
}

TEST(Cpu, PollThreadNames) {
  EXPECT_TRUE(is_kernel_poll_thread("io_uring-sq"));
  EXPECT_TRUE(is_kernel_poll_thread("iou-sqp-1234"));
  EXPECT_FALSE(is_kernel_poll_thread("iou-wrk-1234"));
  EXPECT_FALSE(is_kernel_poll_thread("bash"));
}

namespace {

class ProcFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = std::filesystem::temp_directory_path() /
            ("readbench_proc_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(root_);
  }
  void TearDown() override { std::filesystem::remove_all(root_); }

  // Writes a stat line; utime and stime are fields 14 and 15.
  void stat(int pid, int tid, const std::string& name, std::uint64_t utime, std::uint64_t stime) {
    const auto line = std::to_string(tid) + " (" + name + ") S 1 1 1 0 -1 4194560 0 0 0 0 " +
                      std::to_string(utime) + " " + std::to_string(stime) + " 0 0 20 0 1 0 0 0 0\n";
    const auto dir = root_ / std::to_string(pid) / "task" / std::to_string(tid);
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "stat") << line;
    if (pid == tid) std::ofstream(root_ / std::to_string(pid) / "stat") << line;
  }

  std::filesystem::path root_;
};

}  // namespace

TEST_F(ProcFixture, ExternalThreadAtTickRateIsOneCore) {
  stat(100, 100, "bench", 10, 5);
  stat(200, 200, "io_uring-sq", 0, 0);
  ProcessTable table(root_, 100);
  const auto before = table.snapshot(is_kernel_poll_thread, 100);
  // One second at 100 ticks per second for the poller; the process idles.
  stat(200, 200, "io_uring-sq", 60, 40);
  const auto after = table.snapshot(is_kernel_poll_thread, 100);
  const auto cpu = measure_cpu(before, after, 1.0);
  EXPECT_DOUBLE_EQ(cpu.external_cpu, 1.0);
  EXPECT_DOUBLE_EQ(cpu.process_cpu, 0.0);
  EXPECT_DOUBLE_EQ(cpu.percent_of_core, 100.0);
}

TEST_F(ProcFixture, OwnPollerIsExternalNotProcess) {
  stat(100, 100, "bench", 50, 0);
  stat(100, 101, "iou-sqp-100", 30, 0);
  ProcessTable table(root_, 100);
  const auto t = table.snapshot(is_kernel_poll_thread, 100);
  EXPECT_DOUBLE_EQ(t.process, 0.2);
  EXPECT_DOUBLE_EQ(t.external, 0.3);
  const auto tasks = table.tasks();
  ASSERT_EQ(tasks.size(), 2u);
  EXPECT_EQ(tasks[1].name, "iou-sqp-100");
}

TEST_F(ProcFixture, NamesWithParensAndSpaces) {
  stat(7, 7, "a (b) c", 3, 4);
  ProcessTable table(root_, 100);
  const auto tasks = table.tasks();
  ASSERT_EQ(tasks.size(), 1u);
  EXPECT_EQ(tasks[0].name, "a (b) c");
  EXPECT_EQ(tasks[0].ticks, 7u);
}

TEST(ProcessTableLive, SelfIsReadable) {
  ProcessTable table;
  const auto t = table.snapshot(is_kernel_poll_thread);
  EXPECT_GE(t.process, 0.0);
  EXPECT_FALSE(table.tasks().empty());
}

TEST(Recorder, KeepsEverythingByDefault) {
  SampleRecorder r;
  for (std::uint64_t i = 0; i < 100; ++i) r.record({i, 4096});
  EXPECT_EQ(r.samples().size(), 100u);
  EXPECT_EQ(r.total_bytes(), 409600u);
}

TEST(Recorder, ReservoirIsBoundedAndUniform) {
  SampleRecorder r(1000, 3);
  for (std::uint64_t i = 0; i < 100000; ++i) r.record({i, 1});
  EXPECT_EQ(r.samples().size(), 1000u);
  EXPECT_EQ(r.seen(), 100000u);
  double mean = 0;
  for (const auto& s : r.samples()) mean += static_cast<double>(s.duration_us);
  mean /= 1000;
  EXPECT_NEAR(mean, 50000, 3000);
}
