// Generates the bundled tanh(5x) toy dataset: band-limited sawtooth-burst
// clean audio plus the samplewise-saturated rendered counterpart.

#include <cstdio>
#include <cstdint>
#include <iostream>
#include <string>

#include "ampgan/toy.hpp"

int main(int argc, char** argv) {
    std::string out = "toy_data";
    std::uint64_t seed = 1;
    int files = 16;
    double secs = 5.0;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        auto next = [&]() -> std::string {
            if (i + 1 >= argc) {
                std::cerr << "missing value for " << a << "\n";
                std::exit(2);
            }
            return argv[++i];
        };
        if (a == "--out")
            out = next();
        else if (a == "--seed")
            seed = std::stoull(next());
        else if (a == "--files")
            files = std::stoi(next());
        else if (a == "--secs-per-file")
            secs = std::stod(next());
        else {
            std::cerr << "usage: toygen [--out DIR] [--seed N] [--files N] [--secs-per-file S]\n";
            return 2;
        }
    }
    try {
        auto ds = ampgan::make_toy_dataset(out, seed, files, secs);
        std::printf("wrote %d clean/rendered pairs, manifest: %s\n", files,
                    ds.manifest_path.c_str());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
