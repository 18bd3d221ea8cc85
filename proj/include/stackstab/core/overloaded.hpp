#pragma once

namespace stackstab {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

}  // namespace stackstab
