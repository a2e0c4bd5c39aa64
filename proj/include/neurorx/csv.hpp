#pragma once

#include "neurorx/pipeline.hpp"

namespace neurorx {

/// Sweep/ablation CSV product. Header:
///   detector,ebno_db,n_subframes,bits,bit_errors,ber,symbols,symbol_errors,
///   ser,excluded_subframes,seconds
/// preceded by '#' metadata lines (config echo + seed). Refuses to overwrite
/// an existing file unless forced.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& metadata,
            bool force);
  ~CsvWriter();

  void write_cell(const std::string& detector, const McCell& cell);
  void write_raw_row(const std::string& row);
  void close();

  static std::string header();

 private:
  std::string path_;
  std::string buffer_;
  bool open_ = false;
};

std::string format_real(Real v);

}  // namespace neurorx
