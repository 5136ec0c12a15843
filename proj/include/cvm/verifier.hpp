#pragma once
//
// Load-time check of one linked method or block. Rejects code the
// interpreter would otherwise have to guard against at every step:
// undecodable or mode-illegal bytes, code that falls off its end, operand
// stack underflow, returns with anything but the result on the stack, and
// out-of-range slot, field and literal operands.

#include "cvm/object_model.hpp"

#include <cstdint>

namespace cvm {

/// Returns the method's maximum operand-stack depth.
/// Throws Error(VerifyError | StackUnderflow) or DecodeError.
std::uint32_t verify_method(const LoadedMethod& method, bytecode::Mode mode);

/// Net stack effect and the depth required before executing `ins`.
struct StackEffect {
    int pops = 0;
    int pushes = 0;
};

StackEffect stack_effect(const bytecode::Instruction& ins, const LoadedMethod& method);

}  // namespace cvm
