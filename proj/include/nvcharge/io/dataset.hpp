#pragma once

// A parsed input file together with the hash of its raw bytes.

#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "nvcharge/io/csv.hpp"
#include "nvcharge/io/files.hpp"
#include "nvcharge/io/json.hpp"

namespace nvcharge::io {

enum class DatasetKind { Spectrum, Arrivals, Sweep, Histogram };

struct Dataset {
    DatasetKind kind = DatasetKind::Spectrum;
    std::variant<spectra::SpectrumTrace, std::vector<double>, std::vector<kinetics::SweepPoint>, HistogramTable> payload;
    std::map<std::string, std::string> metadata;
    std::string content_hash;

    const spectra::SpectrumTrace& spectrum() const { return std::get<spectra::SpectrumTrace>(payload); }
    const std::vector<double>& arrivals() const { return std::get<std::vector<double>>(payload); }
    const std::vector<kinetics::SweepPoint>& sweep() const { return std::get<std::vector<kinetics::SweepPoint>>(payload); }
    const HistogramTable& histogram() const { return std::get<HistogramTable>(payload); }
};

inline Dataset parse_dataset(std::string_view bytes, DatasetKind kind, bool binary_arrivals = false) {
    Dataset d;
    d.kind = kind;
    d.content_hash = content_hash(bytes);
    switch (kind) {
    case DatasetKind::Spectrum: {
        auto s = parse_spectrum_csv(bytes);
        d.metadata = s.metadata;
        d.payload = std::move(s);
        break;
    }
    case DatasetKind::Arrivals:
        d.payload = binary_arrivals ? parse_arrivals_binary(bytes) : parse_arrivals_csv(bytes);
        break;
    case DatasetKind::Sweep:
        d.payload = parse_sweep_csv(bytes);
        break;
    case DatasetKind::Histogram: {
        auto h = parse_histogram_csv(bytes);
        d.metadata = h.metadata;
        d.payload = std::move(h);
        break;
    }
    }
    return d;
}

// Arrival files ending in .bin or .f64 are read as raw float64.
inline Dataset load_dataset(const std::filesystem::path& path, DatasetKind kind) {
    const std::string ext = path.extension().string();
    const bool binary = kind == DatasetKind::Arrivals && (ext == ".bin" || ext == ".f64");
    return parse_dataset(read_file(path), kind, binary);
}

} // namespace nvcharge::io
