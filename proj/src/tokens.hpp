#pragma once

namespace genmc::tok {

// Reserved vocabulary ids, stable across save/load.
constexpr int PAD = 0;
constexpr int BOS = 1;
constexpr int EOS = 2;
constexpr int UNK = 3;
constexpr int DELIM = 4;      // renders the "\n" separator between question and option
constexpr int OPTION_A = 5;   // "(A)".."(H)" occupy ids 5..12
constexpr int MAX_OPTIONS = 8;
constexpr int NUM_RESERVED = OPTION_A + MAX_OPTIONS;  // 13

}  // namespace genmc::tok
