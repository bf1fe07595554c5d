#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <vector>

#include <zlib.h>

namespace relm {

// Errors are split by origin so the CLI can map them to exit codes.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::vector<std::string_view> split_on(std::string_view line,
                                              std::string_view sep) {
  std::vector<std::string_view> out;
  size_t pos = 0;
  while (true) {
    size_t next = line.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + sep.size();
  }
  return out;
}

inline std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' ||
                        s.back() == ' ' || s.back() == '\t'))
    s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  return s;
}

template <typename It>
std::string join(It first, It last, std::string_view sep) {
  std::string out;
  for (It it = first; it != last; ++it) {
    if (it != first) out += sep;
    out += *it;
  }
  return out;
}

// Shortest decimal that round-trips the double; used by formats that
// must survive a write/read/write cycle byte for byte.
inline std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw FormatError("bad number: '" + std::string(s) + "'");
  return v;
}

inline bool parse_u64(std::string_view s, uint64_t& out) {
  if (s.empty()) return false;
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

// Line reader over plain or gzip files (zlib reads both transparently).
class LineReader {
 public:
  explicit LineReader(const std::string& path) : path_(path) {
    f_ = gzopen(path.c_str(), "rb");
    if (!f_) throw FormatError("cannot open " + path);
  }
  ~LineReader() {
    if (f_) gzclose(f_);
  }
  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;

  bool next(std::string& line) {
    line.clear();
    char buf[1 << 16];
    while (true) {
      if (pos_ < len_) {
        char* nl = static_cast<char*>(memchr(buf_.data() + pos_, '\n', len_ - pos_));
        if (nl) {
          line.append(buf_.data() + pos_, nl - (buf_.data() + pos_));
          pos_ = (nl - buf_.data()) + 1;
          if (!line.empty() && line.back() == '\r') line.pop_back();
          return true;
        }
        line.append(buf_.data() + pos_, len_ - pos_);
        pos_ = len_ = 0;
      }
      int n = gzread(f_, buf, sizeof buf);
      if (n < 0) throw FormatError("read error on " + path_);
      if (n == 0) {
        if (!line.empty()) {
          if (line.back() == '\r') line.pop_back();
          return true;
        }
        return false;
      }
      buf_.assign(buf, buf + n);
      pos_ = 0;
      len_ = static_cast<size_t>(n);
    }
  }

 private:
  std::string path_;
  gzFile f_ = nullptr;
  std::string buf_;
  size_t pos_ = 0, len_ = 0;
};

// Collects output and moves it to the target path only on commit, so an
// interrupted run never leaves a partial artifact behind.
class AtomicFile {
 public:
  explicit AtomicFile(const std::string& path)
      : path_(path), tmp_(path + ".tmp." + std::to_string(::getpid())) {
    gz_ = path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
    if (gz_) {
      gzf_ = gzopen(tmp_.c_str(), "wb");
      if (!gzf_) throw std::runtime_error("cannot open " + tmp_);
    } else {
      out_.open(tmp_, std::ios::binary);
      if (!out_) throw std::runtime_error("cannot open " + tmp_);
    }
  }
  ~AtomicFile() {
    if (!committed_) {
      if (gzf_) gzclose(gzf_);
      out_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }

  void write(std::string_view data) {
    if (gz_) {
      if (gzwrite(gzf_, data.data(), static_cast<unsigned>(data.size())) !=
          static_cast<int>(data.size()))
        throw std::runtime_error("write error on " + tmp_);
    } else {
      out_.write(data.data(), static_cast<std::streamsize>(data.size()));
    }
  }
  AtomicFile& operator<<(std::string_view data) {
    write(data);
    return *this;
  }

  void commit() {
    if (gz_) {
      if (gzclose(gzf_) != Z_OK) throw std::runtime_error("close error on " + tmp_);
      gzf_ = nullptr;
    } else {
      out_.flush();
      if (!out_) throw std::runtime_error("write error on " + tmp_);
      out_.close();
    }
    std::filesystem::rename(tmp_, path_);
    committed_ = true;
  }

 private:
  std::string path_, tmp_;
  bool gz_ = false, committed_ = false;
  gzFile gzf_ = nullptr;
  std::ofstream out_;
};

inline uint64_t fnv1a64(std::string_view data, uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return 0;
  uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0)
    h = fnv1a64(std::string_view(buf, static_cast<size_t>(in.gcount())), h);
  return h;
}

// Static split over [0, n); worker results must be written to
// pre-assigned slots so the reduction stays deterministic.
inline void parallel_for(size_t n, unsigned threads,
                         const std::function<void(size_t, size_t)>& body) {
  if (threads <= 1 || n < 2) {
    body(0, n);
    return;
  }
  unsigned t = std::min<unsigned>(threads, static_cast<unsigned>(n));
  std::vector<std::thread> pool;
  size_t chunk = (n + t - 1) / t;
  for (unsigned i = 0; i < t; ++i) {
    size_t b = i * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&body, b, e] { body(b, e); });
  }
  for (auto& th : pool) th.join();
}

using Rng = std::mt19937_64;

}  // namespace relm
