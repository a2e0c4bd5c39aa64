#include "neurorx/csv.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace neurorx {

std::string format_real(Real v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string CsvWriter::header() {
  return "detector,ebno_db,n_subframes,bits,bit_errors,ber,symbols,"
         "symbol_errors,ser,excluded_subframes,seconds";
}

CsvWriter::CsvWriter(const std::string& path,
                     const std::vector<std::string>& metadata, bool force) {
  path_ = path;
  if (std::filesystem::exists(path) && !force)
    throw ConfigError("refusing to overwrite existing file (use --force): " + path);
  for (const auto& line : metadata) buffer_ += "# " + line + "\n";
  buffer_ += header() + "\n";
  open_ = true;
}

void CsvWriter::write_cell(const std::string& detector, const McCell& cell) {
  std::ostringstream os;
  os.precision(17);
  os << detector << ',' << cell.ebno_db << ',' << cell.n_subframes << ','
     << cell.bits << ',' << cell.bit_errors << ',' << cell.ber() << ','
     << cell.symbols << ',' << cell.symbol_errors << ',' << cell.ser() << ','
     << cell.excluded_subframes << ',' << cell.seconds << "\n";
  buffer_ += os.str();
}

void CsvWriter::write_raw_row(const std::string& row) { buffer_ += row + "\n"; }

void CsvWriter::close() {
  if (!open_) return;
  const auto parent = std::filesystem::path(path_).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path_, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path_);
  out << buffer_;
  if (!out) throw ConfigError("write failure on " + path_);
  open_ = false;
}

CsvWriter::~CsvWriter() {
  try {
    close();
  } catch (...) {
  }
}

}  // namespace neurorx
