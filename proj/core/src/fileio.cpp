#include "coronal/fileio.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include "coronal/error.hpp"

namespace coronal {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ContractViolation: return "E_CONTRACT";
    case ErrorCode::Io: return "E_IO";
    case ErrorCode::Config: return "E_CONFIG";
    case ErrorCode::MissingInput: return "E_MISSING_INPUT";
    case ErrorCode::NumericalFailure: return "E_NUMERICAL";
    case ErrorCode::ModelFit: return "E_MODEL_FIT";
    case ErrorCode::Training: return "E_TRAINING";
    case ErrorCode::SensitivityUndefined: return "E_SENS_UNDEFINED";
  }
  return "E_UNKNOWN";
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!std::filesystem::exists(path)) throw MissingInput("missing file: " + path.string());
    throw IoError("cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " +
                          ec.message());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " +
                        ec.message());
}

}  // namespace coronal
