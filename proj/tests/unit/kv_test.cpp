#include <gtest/gtest.h>

#include <sstream>

#include "readbench/errors.hpp"
#include "readbench/kv.hpp"

using namespace readbench;

TEST(Kv, ParsesCommentsAndBlanks) {
  std::istringstream in("# header\n\na = 1\n  b=two words  \n# x = y\nc = 3 # trailing\n");
  const auto kv = parse_key_values(in);
  ASSERT_EQ(kv.size(), 3u);
  EXPECT_EQ(kv[0], (std::pair<std::string, std::string>{"a", "1"}));
  EXPECT_EQ(kv[1].second, "two words");
  EXPECT_EQ(kv[2].second, "3");
}

TEST(Kv, MalformedLineNamesLine) {
  std::istringstream in("a = 1\nnonsense\n");
  try {
    parse_key_values(in);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Kv, Sizes) {
  EXPECT_EQ(parse_size("4096"), 4096u);
  EXPECT_EQ(parse_size("4K"), 4096u);
  EXPECT_EQ(parse_size("4KiB"), 4096u);
  EXPECT_EQ(parse_size("64M"), 64u << 20);
  EXPECT_EQ(parse_size("1G"), 1u << 30);
  EXPECT_EQ(parse_size("2T"), 2ULL << 40);
  EXPECT_THROW(parse_size("4Q"), ConfigError);
  EXPECT_THROW(parse_size(""), ConfigError);
  EXPECT_EQ(format_size(4096), "4K");
  EXPECT_EQ(format_size(32u << 20), "32M");
  EXPECT_EQ(format_size(3000), "3000");
  for (std::uint64_t v : {4096ULL, 1ULL << 20, 3ULL << 30, 12345ULL}) EXPECT_EQ(parse_size(format_size(v)), v);
  EXPECT_EQ(parse_size_list("4K, 8K,1M"), (std::vector<std::uint64_t>{4096, 8192, 1 << 20}));
}

TEST(Kv, Scalars) {
  EXPECT_DOUBLE_EQ(parse_double("2.5", "x"), 2.5);
  EXPECT_THROW(parse_double("2.5s", "x"), ConfigError);
  EXPECT_EQ(parse_u64("0x10", "x"), 16u);
  EXPECT_THROW(parse_u64("-1", "x"), ConfigError);
  EXPECT_TRUE(parse_bool("yes", "x"));
  EXPECT_FALSE(parse_bool("0", "x"));
  EXPECT_THROW(parse_bool("maybe", "x"), ConfigError);
}
