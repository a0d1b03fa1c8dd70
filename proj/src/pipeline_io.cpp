#include "scproj/classifier.hpp"

#include <cstring>
#include <fstream>

namespace scproj {

namespace {

constexpr char kMagic[4] = {'S', 'C', 'P', 'J'};
constexpr std::uint32_t kFormatVersion = 1;

// ---- little-endian payload writers -----------------------------------------

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u64(out, bits);
}

void put_string(std::string& out, const std::string& s) {
    put_u64(out, s.size());
    out.append(s);
}

void put_strings(std::string& out, const std::vector<std::string>& list) {
    put_u64(out, list.size());
    for (const auto& s : list) put_string(out, s);
}

void put_vector(std::string& out, const Vector& v) {
    put_u64(out, static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(out, v(i));
}

void put_matrix(std::string& out, const Matrix& m) {
    put_u64(out, static_cast<std::uint64_t>(m.rows()));
    put_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
    }
}

// ---- bounds-checked payload reader ------------------------------------------

class Reader {
public:
    Reader(const char* data, std::size_t size) : data_(data), size_(size) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= std::uint32_t(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= std::uint64_t(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += 8;
        return v;
    }

    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }

    std::string str() {
        const std::uint64_t len = u64();
        need(len);
        std::string s(data_ + pos_, len);
        pos_ += len;
        return s;
    }

    std::vector<std::string> strings() {
        const std::uint64_t count = u64();
        std::vector<std::string> list;
        list.reserve(count);
        for (std::uint64_t i = 0; i < count; ++i) list.push_back(str());
        return list;
    }

    Vector vector() {
        const std::uint64_t size = u64();
        need(size * 8);
        Vector v(static_cast<Eigen::Index>(size));
        for (std::uint64_t i = 0; i < size; ++i) v(static_cast<Eigen::Index>(i)) = f64();
        return v;
    }

    Matrix matrix() {
        const std::uint64_t rows = u64();
        const std::uint64_t cols = u64();
        if (cols != 0 && rows > remaining() / (8 * cols) + 1) {
            throw FormatError("pipeline file declares an impossible matrix size");
        }
        need(rows * cols * 8);
        Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::uint64_t r = 0; r < rows; ++r) {
            for (std::uint64_t c = 0; c < cols; ++c) {
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = f64();
            }
        }
        return m;
    }

    bool done() const { return pos_ == size_; }

private:
    std::size_t remaining() const { return size_ - pos_; }

    void need(std::uint64_t bytes) const {
        if (bytes > remaining()) throw FormatError("truncated pipeline file");
    }

    const char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

std::string encode_payload(const TrainedPipeline& p) {
    std::string out;
    put_u64(out, p.recipe.hvg_count);
    put_f64(out, p.recipe.size_factor_target);
    put_strings(out, p.recipe.selected_genes);
    put_vector(out, p.recipe.per_gene_mean);
    put_vector(out, p.recipe.per_gene_std);

    put_strings(out, p.basis.gene_names);
    put_matrix(out, p.basis.ensemble);
    put_matrix(out, p.basis.pca.components);
    put_vector(out, p.basis.pca.eigenvalues);
    put_vector(out, p.basis.pca.center);
    put_matrix(out, p.basis.mda.components);
    put_vector(out, p.basis.mda.eigenvalues);
    put_matrix(out, p.basis.mda.class_means);
    put_f64(out, p.basis.mda.regularization);

    put_u64(out, static_cast<std::uint64_t>(p.model.input_dim));
    put_strings(out, p.model.label_dict);
    put_u64(out, p.model.layers.size());
    for (const auto& layer : p.model.layers) {
        put_matrix(out, layer.weights);
        put_vector(out, layer.bias.transpose());
    }

    put_u64(out, p.training_meta.config.size());
    for (const auto& [key, value] : p.training_meta.config) {
        put_string(out, key);
        put_string(out, value);
    }
    put_u64(out, p.training_meta.losses.size());
    for (const auto& row : p.training_meta.losses) {
        put_u64(out, static_cast<std::uint64_t>(row.epoch));
        put_f64(out, row.train_loss);
        put_f64(out, row.val_loss);
    }
    put_u64(out, p.training_meta.data_fingerprint);
    return out;
}

TrainedPipeline decode_payload(Reader& in) {
    TrainedPipeline p;
    p.recipe.hvg_count = in.u64();
    p.recipe.size_factor_target = in.f64();
    p.recipe.selected_genes = in.strings();
    p.recipe.per_gene_mean = in.vector();
    p.recipe.per_gene_std = in.vector();

    p.basis.gene_names = in.strings();
    p.basis.ensemble = in.matrix();
    p.basis.pca.components = in.matrix();
    p.basis.pca.eigenvalues = in.vector();
    p.basis.pca.center = in.vector();
    p.basis.mda.components = in.matrix();
    p.basis.mda.eigenvalues = in.vector();
    p.basis.mda.class_means = in.matrix();
    p.basis.mda.regularization = in.f64();

    p.model.input_dim = static_cast<Eigen::Index>(in.u64());
    p.model.label_dict = in.strings();
    const std::uint64_t n_layers = in.u64();
    p.model.layers.resize(n_layers);
    for (std::uint64_t i = 0; i < n_layers; ++i) {
        p.model.layers[i].weights = in.matrix();
        p.model.layers[i].bias = in.vector().transpose();
    }

    const std::uint64_t n_config = in.u64();
    for (std::uint64_t i = 0; i < n_config; ++i) {
        std::string key = in.str();
        std::string value = in.str();
        p.training_meta.config.emplace_back(std::move(key), std::move(value));
    }
    const std::uint64_t n_losses = in.u64();
    for (std::uint64_t i = 0; i < n_losses; ++i) {
        EpochLoss row;
        row.epoch = static_cast<int>(in.u64());
        row.train_loss = in.f64();
        row.val_loss = in.f64();
        p.training_meta.losses.push_back(row);
    }
    p.training_meta.data_fingerprint = in.u64();

    if (!in.done()) throw FormatError("trailing bytes after pipeline payload");
    return p;
}

}  // namespace

void save_pipeline(const TrainedPipeline& pipeline, const std::string& path) {
    const std::string payload = encode_payload(pipeline);

    std::string header;
    header.append(kMagic, sizeof(kMagic));
    put_u32(header, kFormatVersion);
    put_u64(header, fnv1a(payload.data(), payload.size()));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("failed writing '" + path + "'");
}

TrainedPipeline load_pipeline(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());

    constexpr std::size_t header_size = 4 + 4 + 8;
    if (bytes.size() < header_size ||
        std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw FormatError("'" + path + "' is not a pipeline file (bad magic)");
    }
    Reader header(bytes.data() + 4, header_size - 4);
    const std::uint32_t version = header.u32();
    if (version != kFormatVersion) {
        throw VersionError("pipeline file format version " + std::to_string(version) +
                           " is not supported (this build reads version " +
                           std::to_string(kFormatVersion) + ")");
    }
    const std::uint64_t stored_checksum = header.u64();

    const char* payload = bytes.data() + header_size;
    const std::size_t payload_size = bytes.size() - header_size;
    if (fnv1a(payload, payload_size) != stored_checksum) {
        throw ChecksumError("'" + path + "' failed its content checksum");
    }

    Reader reader(payload, payload_size);
    return decode_payload(reader);
}

}  // namespace scproj
