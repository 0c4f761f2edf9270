#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <unistd.h>

namespace modeshift::testing {

namespace fs = std::filesystem;

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("modeshift-test-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(TempDir const&) = delete;
  TempDir& operator=(TempDir const&) = delete;

  fs::path const& path() const { return path_; }
  fs::path operator/(std::string const& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_text(fs::path const& path, std::string const& text) {
  fs::create_directories(path.parent_path());
  std::ofstream{path, std::ios::binary} << text;
}

inline std::string read_text(fs::path const& path) {
  std::ifstream in{path, std::ios::binary};
  return {std::istreambuf_iterator<char>{in}, std::istreambuf_iterator<char>{}};
}

// Minimal GTFS feed: every file given as raw CSV text.
struct FeedText {
  std::string stops =
      "stop_id,stop_name,stop_lat,stop_lon\n"
      "S1,First,35.0,-85.0\n"
      "S2,Second,35.01,-85.0\n"
      "S3,Third,35.02,-85.0\n";
  std::string routes =
      "route_id,route_short_name,route_long_name,route_type\n"
      "R1,10A,,3\n";
  std::string trips;
  std::string stop_times;
  std::string calendar =
      "service_id,monday,tuesday,wednesday,thursday,friday,saturday,sunday,"
      "start_date,end_date\n"
      "WK,1,1,1,1,1,0,0,20231101,20231231\n";
  std::optional<std::string> calendar_dates;
  std::optional<std::string> frequencies;

  void write(fs::path const& dir) const {
    write_text(dir / "stops.txt", stops);
    write_text(dir / "routes.txt", routes);
    write_text(dir / "trips.txt", trips);
    write_text(dir / "stop_times.txt", stop_times);
    write_text(dir / "calendar.txt", calendar);
    if (calendar_dates) write_text(dir / "calendar_dates.txt", *calendar_dates);
    if (frequencies) write_text(dir / "frequencies.txt", *frequencies);
  }
};

inline std::string hms(long long t) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%02lld:%02lld:%02lld", t / 3600, (t / 60) % 60, t % 60);
  return buf;
}

}  // namespace modeshift::testing
