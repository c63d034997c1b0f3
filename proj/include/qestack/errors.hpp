#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qestack {

// Base of every validation error raised by the library. The CLI maps these
// to exit code 1; IoError maps to exit code 2.
class QeError : public std::runtime_error {
 public:
  QeError(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class IoError : public QeError {
 public:
  explicit IoError(const std::string& what) : QeError("IoError", what) {}
};

// Cross-file or cross-stream length violation. `line` is 1-based; 0 means
// the file as a whole (e.g. line count differs).
class LengthMismatch : public QeError {
 public:
  LengthMismatch(const std::string& file, std::size_t line, const std::string& what)
      : QeError("LengthMismatch", locate(file, line) + what), file_(file), line_(line) {}
  explicit LengthMismatch(const std::string& what) : QeError("LengthMismatch", what) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

  static std::string locate(const std::string& file, std::size_t line) {
    if (file.empty()) return {};
    return line == 0 ? file + ": " : file + ":" + std::to_string(line) + ": ";
  }

 private:
  std::string file_;
  std::size_t line_ = 0;
};

class ParseError : public QeError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : QeError("ParseError", LengthMismatch::locate(file, line) + what) {}
  explicit ParseError(const std::string& what) : QeError("ParseError", what) {}
};

class RangeError : public QeError {
 public:
  RangeError(const std::string& file, std::size_t line, const std::string& what)
      : QeError("RangeError", LengthMismatch::locate(file, line) + what) {}
  explicit RangeError(const std::string& what) : QeError("RangeError", what) {}
};

class EmptyInput : public QeError {
 public:
  explicit EmptyInput(const std::string& what) : QeError("EmptyInput", what) {}
};

class DegenerateInput : public QeError {
 public:
  explicit DegenerateInput(const std::string& what) : QeError("DegenerateInput", what) {}
};

class InconsistentScript : public QeError {
 public:
  explicit InconsistentScript(const std::string& what) : QeError("InconsistentScript", what) {}
};

class IndexError : public QeError {
 public:
  explicit IndexError(const std::string& what) : QeError("IndexError", what) {}
};

class MissingStream : public QeError {
 public:
  explicit MissingStream(const std::string& what) : QeError("MissingStream", what) {}
};

class ZeroWeights : public QeError {
 public:
  explicit ZeroWeights(const std::string& what) : QeError("ZeroWeights", what) {}
};

class SingularSystem : public QeError {
 public:
  explicit SingularSystem(const std::string& what) : QeError("SingularSystem", what) {}
};

class SpanOutOfBounds : public QeError {
 public:
  explicit SpanOutOfBounds(const std::string& what) : QeError("SpanOutOfBounds", what) {}
};

class ConfigError : public QeError {
 public:
  explicit ConfigError(const std::string& what) : QeError("ConfigError", what) {}
};

}  // namespace qestack
