#include "sneuron/io_util.hpp"

#include "sneuron/error.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

namespace sneuron {

std::string read_file(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        fail(ErrorKind::Usage, "cannot open '" + path.string() + "': no such file");
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Usage, "cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    auto partial = path;
    partial += ".partial";
    {
        std::ofstream out(partial, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::Usage, "cannot write '" + partial.string() + "'");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) fail(ErrorKind::Usage, "write failed for '" + partial.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(partial, path, ec);
    if (ec) fail(ErrorKind::Usage, "cannot rename '" + partial.string() + "': " + ec.message());
}

} // namespace sneuron
