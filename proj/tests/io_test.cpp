#include <cstdio>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "mixmem/io.hpp"

using namespace mixmem;

namespace {

std::string strip_cr(std::string s) {
  std::erase(s, '\r');
  return s;
}

std::string error_of(const std::string& text) {
  try {
    parse_dataset(text, "f.csv");
  } catch (const DatasetError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(ParseDataset, SmallFile) {
  const auto x = parse_dataset("id,h1,h2\na,0,3\nb,5,2");
  EXPECT_EQ(x.rows(), 2u);
  EXPECT_EQ(x.cols(), 2u);
  EXPECT_EQ(x(0, 0), 0);
  EXPECT_EQ(x(0, 1), 3);
  EXPECT_EQ(x(1, 0), 5);
  EXPECT_EQ(x(1, 1), 2);
  EXPECT_EQ(x.row_ids(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(x.col_ids(), (std::vector<std::string>{"h1", "h2"}));
  EXPECT_EQ(x.id_header(), "id");
}

TEST(ParseDataset, CrlfAccepted) {
  const auto x = parse_dataset("id,h1\r\nr1,4\r\nr2,7\r\n");
  EXPECT_EQ(x.rows(), 2u);
  EXPECT_EQ(x(1, 0), 7);
  EXPECT_EQ(x.col_ids()[0], "h1");
}

TEST(ParseDataset, NegativeCellNamesLocation) {
  const auto msg = error_of("id,h1,h2\na,0,3\nb,-1,2\n");
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("column 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("h1"), std::string::npos) << msg;
  EXPECT_NE(msg.find("-1"), std::string::npos) << msg;
}

TEST(ParseDataset, Rejections) {
  EXPECT_NE(error_of("id,h1\na,1.5\n").find("not an integer"), std::string::npos);
  EXPECT_NE(error_of("id,h1\na,\n").find("missing"), std::string::npos);
  EXPECT_NE(error_of("id,h1\na,NA\n").find("missing"), std::string::npos);
  EXPECT_NE(error_of("id,h1,h2\na,1\n").find("expected 3 fields"), std::string::npos);
  EXPECT_NE(error_of("").find("header"), std::string::npos);
  EXPECT_NE(error_of("id,h1\n").find("no observations"), std::string::npos);
  EXPECT_NE(error_of("id\na\n").find("attribute"), std::string::npos);
  EXPECT_NE(error_of("id,h1\na,1\n\nb,2\n").find("empty row"), std::string::npos);
}

TEST(Dataset, RoundTripIsByteIdenticalModuloLineEndings) {
  const std::string lf = "runner,h1,h2,h3\nr001,12,11,0\nr002,9,9,8\nr003,0,0,0\n";
  const std::string crlf = "runner,h1,h2,h3\r\nr001,12,11,0\r\nr002,9,9,8\r\nr003,0,0,0\r\n";
  EXPECT_EQ(format_dataset(parse_dataset(lf)), lf);
  EXPECT_EQ(format_dataset(parse_dataset(crlf)), strip_cr(crlf));

  const auto dir = std::filesystem::temp_directory_path() / "mixmem_io_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "data.csv").string();
  save_dataset(parse_dataset(lf), path);
  EXPECT_EQ(io::read_file(path), lf);
  EXPECT_EQ(load_dataset(path).values(), parse_dataset(lf).values());
  std::filesystem::remove_all(dir);
}

TEST(Dataset, MissingFile) { EXPECT_THROW(load_dataset("/nonexistent/data.csv"), DatasetError); }

TEST(RealGrid, LoadsWithMetadataAndLabels) {
  const auto dir = std::filesystem::temp_directory_path() / "mixmem_io_grid";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "theta.csv").string();
  io::write_file(path, "# seed: 3\nprofile,h1,h2\n1,2.5,3\n2,1e-3,7\n");
  const RealGrid g = load_real_grid(path, true);
  ASSERT_EQ(g.rows(), 2);
  ASSERT_EQ(g.cols(), 2);
  EXPECT_DOUBLE_EQ(g(0, 0), 2.5);
  EXPECT_DOUBLE_EQ(g(1, 0), 1e-3);
  io::write_file(path, "a,b\n1,x\n");
  EXPECT_THROW(load_real_grid(path, false), DatasetError);
  std::filesystem::remove_all(dir);
}

TEST(PlotFile, Format) {
  PlotFile f;
  f.meta = {{"seed", "7"}, {"config_hash", "abc"}};
  f.columns = {"g", "value"};
  f.rows = {{"1", "2.5"}, {"2", "-3"}};
  EXPECT_EQ(f.format(), "# seed: 7\n# config_hash: abc\ng,value\n1,2.5\n2,-3\n");
}

TEST(Io, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.125}) {
    EXPECT_EQ(std::stod(io::format_double(v)), v);
  }
  EXPECT_EQ(io::format_double(2.0), "2");
}

TEST(Io, ConfigHashIsStable) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_NE(fnv1a_hex("{\"G\":3}"), fnv1a_hex("{\"G\":4}"));
}

TEST(PlotFile, QuotesFieldsWithCommas) {
  PlotFile f;
  f.columns = {"group", "set"};
  f.rows = {{"1", "{1,4}"}, {"2", "say \"hi\""}};
  EXPECT_EQ(f.format(), "group,set\n1,\"{1,4}\"\n2,\"say \"\"hi\"\"\"\n");
}
