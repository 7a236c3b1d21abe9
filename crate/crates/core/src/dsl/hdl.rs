//! Verilog emission for a compiled table.
//!
//! The module has exactly two inputs, the clock and the 3-bit command, and
//! one 24-bit lamp output. States are sequentially encoded: traditional
//! phases take codes `0..n`, followed by the safe transition, the four
//! emergency holds and the operator safe hold. Outputs are Mealy: a command
//! that preempts the current state switches `lights` to the safe word in the
//! same cycle.

use std::fmt::Write as _;

use thiserror::Error;

use crate::signal::RoadId;
use crate::table::PhaseTable;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid module name {0:?}: expected [A-Za-z_][A-Za-z0-9_]*")]
pub struct InvalidModuleName(pub String);

fn valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn bits_for(max: u32) -> u32 {
    (u32::BITS - max.leading_zeros()).max(1)
}

pub fn emit_hdl(table: &PhaseTable, module_name: &str) -> Result<String, InvalidModuleName> {
    if !valid_identifier(module_name) {
        return Err(InvalidModuleName(module_name.to_string()));
    }

    let program = table.traditional();
    let n = program.len();
    let state_count = n + 6;
    let state_bits = bits_for(state_count as u32 - 1);
    let s_transition = n;
    let s_emergency = |road: RoadId| n + road.get() as usize;
    let s_safe_hold = n + 5;

    let max_count = program
        .phases()
        .iter()
        .map(|p| p.duration_ticks())
        .chain(table.emergencies().iter().map(|e| e.min_ticks))
        .chain([table.safe_transition_ticks(), table.min_safe_hold_ticks()])
        .max()
        .unwrap_or(1);
    let count_bits = bits_for(max_count);
    let sb = state_bits;
    let cb = count_bits;

    let mut v = String::new();
    let _ = writeln!(v, "// Junction controller '{}'.", table.name());
    let _ = writeln!(v, "// Table hash {}", table.content_hash());
    let _ = writeln!(v, "// state_in: 0 traditional, 1-4 emergency road 1-4, 5 safe hold, 6-7 reserved.");
    let _ = writeln!(v, "module {module_name} (");
    let _ = writeln!(v, "    input  wire        clk,");
    let _ = writeln!(v, "    input  wire [2:0]  state_in,");
    let _ = writeln!(v, "    output reg  [23:0] lights");
    let _ = writeln!(v, ");");
    let _ = writeln!(v);

    let _ = writeln!(v, "    // Sequentially encoded states.");
    for (i, phase) in program.phases().iter().enumerate() {
        let _ = writeln!(
            v,
            "    localparam [{}:0] S_PHASE_{i} = {sb}'d{i}; // {}, {} ticks",
            sb - 1,
            table.traditional_name(i),
            phase.duration_ticks()
        );
    }
    let _ = writeln!(v, "    localparam [{}:0] S_SAFE_TRANSITION = {sb}'d{s_transition};", sb - 1);
    for road in RoadId::ALL {
        let _ = writeln!(
            v,
            "    localparam [{}:0] S_EMERGENCY_{road} = {sb}'d{};",
            sb - 1,
            s_emergency(road)
        );
    }
    let _ = writeln!(v, "    localparam [{}:0] S_SAFE_HOLD = {sb}'d{s_safe_hold};", sb - 1);
    let _ = writeln!(v);

    let _ = writeln!(v, "    localparam [23:0] SAFE_WORD = 24'h{};", table.safe_word());
    let _ = writeln!(
        v,
        "    localparam [{}:0] SAFE_TRANSITION_TICKS = {cb}'d{};",
        cb - 1,
        table.safe_transition_ticks()
    );
    let _ = writeln!(
        v,
        "    localparam [{}:0] MIN_SAFE_HOLD_TICKS = {cb}'d{};",
        cb - 1,
        table.min_safe_hold_ticks()
    );
    for e in table.emergencies() {
        let _ = writeln!(
            v,
            "    localparam [{}:0] MIN_EMERGENCY_{}_TICKS = {cb}'d{};",
            cb - 1,
            e.road,
            e.min_ticks
        );
    }
    let _ = writeln!(v);

    let _ = writeln!(v, "    // count: ticks left in a phase or transition, ticks held in a hold.");
    let _ = writeln!(v, "    reg [{}:0] state;", sb - 1);
    let _ = writeln!(v, "    reg [{}:0] count;", cb - 1);
    let _ = writeln!(v, "    reg [2:0] target;");
    let _ = writeln!(v, "    reg [2:0] pending;");
    let _ = writeln!(v, "    reg       pending_valid;");
    let _ = writeln!(v);
    let _ = writeln!(v, "    reg [{}:0] next_state;", sb - 1);
    let _ = writeln!(v, "    reg [{}:0] next_count;", cb - 1);
    let _ = writeln!(v, "    reg [2:0] next_target;");
    let _ = writeln!(v, "    reg [2:0] next_pending;");
    let _ = writeln!(v, "    reg       next_pending_valid;");
    let _ = writeln!(v);
    let _ = writeln!(v, "    wire cmd_live    = state_in <= 3'd5;");
    let _ = writeln!(v, "    wire cmd_request = state_in >= 3'd1 && state_in <= 3'd5;");
    let _ = writeln!(v);

    let first = program.phase(0).duration_ticks();
    let _ = writeln!(v, "    initial begin");
    let _ = writeln!(v, "        state = S_PHASE_0;");
    let _ = writeln!(v, "        count = {cb}'d{first};");
    let _ = writeln!(v, "        target = 3'd0;");
    let _ = writeln!(v, "        pending = 3'd0;");
    let _ = writeln!(v, "        pending_valid = 1'b0;");
    let _ = writeln!(v, "    end");
    let _ = writeln!(v);

    let _ = writeln!(v, "    task enter_target;");
    let _ = writeln!(v, "        input [2:0] code;");
    let _ = writeln!(v, "        begin");
    let _ = writeln!(v, "            next_pending_valid = 1'b0;");
    let _ = writeln!(v, "            case (code)");
    let _ = writeln!(v, "                3'd1: begin next_state = S_EMERGENCY_1; next_count = {cb}'d0; end");
    let _ = writeln!(v, "                3'd2: begin next_state = S_EMERGENCY_2; next_count = {cb}'d0; end");
    let _ = writeln!(v, "                3'd3: begin next_state = S_EMERGENCY_3; next_count = {cb}'d0; end");
    let _ = writeln!(v, "                3'd4: begin next_state = S_EMERGENCY_4; next_count = {cb}'d0; end");
    let _ = writeln!(v, "                3'd5: begin next_state = S_SAFE_HOLD; next_count = {cb}'d0; end");
    let _ = writeln!(v, "                default: begin next_state = S_PHASE_0; next_count = {cb}'d{first}; end");
    let _ = writeln!(v, "            endcase");
    let _ = writeln!(v, "        end");
    let _ = writeln!(v, "    endtask");
    let _ = writeln!(v);
    let _ = writeln!(v, "    // The current cycle is the first safe tick.");
    let _ = writeln!(v, "    task begin_transition;");
    let _ = writeln!(v, "        input [2:0] code;");
    let _ = writeln!(v, "        begin");
    let _ = writeln!(v, "            next_pending_valid = 1'b0;");
    let _ = writeln!(v, "            if (SAFE_TRANSITION_TICKS <= 1) begin");
    let _ = writeln!(v, "                enter_target(code);");
    let _ = writeln!(v, "            end else begin");
    let _ = writeln!(v, "                next_state = S_SAFE_TRANSITION;");
    let _ = writeln!(v, "                next_target = code;");
    let _ = writeln!(v, "                next_count = SAFE_TRANSITION_TICKS - 1;");
    let _ = writeln!(v, "            end");
    let _ = writeln!(v, "        end");
    let _ = writeln!(v, "    endtask");
    let _ = writeln!(v);

    let _ = writeln!(v, "    // Next-state and output logic.");
    let _ = writeln!(v, "    always @(*) begin");
    let _ = writeln!(v, "        next_state = state;");
    let _ = writeln!(v, "        next_count = count;");
    let _ = writeln!(v, "        next_target = target;");
    let _ = writeln!(v, "        next_pending = pending;");
    let _ = writeln!(v, "        next_pending_valid = pending_valid;");
    let _ = writeln!(v, "        lights = SAFE_WORD;");
    let _ = writeln!(v, "        case (state)");

    for (i, phase) in program.phases().iter().enumerate() {
        let next = (i + 1) % n;
        let next_dur = program.phase(next).duration_ticks();
        let _ = writeln!(v, "            S_PHASE_{i}: begin");
        let _ = writeln!(v, "                if (cmd_request) begin");
        let _ = writeln!(v, "                    lights = SAFE_WORD;");
        let _ = writeln!(v, "                    begin_transition(state_in);");
        let _ = writeln!(v, "                end else begin");
        let _ = writeln!(v, "                    lights = 24'h{};", phase.word());
        let _ = writeln!(v, "                    if (count <= {cb}'d1) begin");
        let _ = writeln!(v, "                        next_state = S_PHASE_{next};");
        let _ = writeln!(v, "                        next_count = {cb}'d{next_dur};");
        let _ = writeln!(v, "                    end else begin");
        let _ = writeln!(v, "                        next_count = count - 1;");
        let _ = writeln!(v, "                    end");
        let _ = writeln!(v, "                end");
        let _ = writeln!(v, "            end");
    }

    let _ = writeln!(v, "            S_SAFE_TRANSITION: begin");
    let _ = writeln!(v, "                lights = SAFE_WORD;");
    let _ = writeln!(v, "                if (count <= {cb}'d1) begin");
    let _ = writeln!(v, "                    enter_target(target);");
    let _ = writeln!(v, "                end else begin");
    let _ = writeln!(v, "                    next_count = count - 1;");
    let _ = writeln!(v, "                end");
    let _ = writeln!(v, "            end");

    let hold_arm = |v: &mut String, label: String, own: &str, min: String, word: String| {
        let _ = writeln!(v, "            {label}: begin");
        let _ = writeln!(v, "                if (cmd_live) begin");
        let _ = writeln!(v, "                    next_pending = state_in;");
        let _ = writeln!(v, "                    next_pending_valid = state_in != {own};");
        let _ = writeln!(v, "                end");
        let _ = writeln!(v, "                if (count >= {min} && next_pending_valid) begin");
        let _ = writeln!(v, "                    lights = SAFE_WORD;");
        let _ = writeln!(v, "                    begin_transition(next_pending);");
        let _ = writeln!(v, "                end else begin");
        let _ = writeln!(v, "                    lights = {word};");
        let _ = writeln!(v, "                    if (count < {min}) next_count = count + 1;");
        let _ = writeln!(v, "                end");
        let _ = writeln!(v, "            end");
    };
    for e in table.emergencies() {
        hold_arm(
            &mut v,
            format!("S_EMERGENCY_{}", e.road),
            &format!("3'd{}", e.road),
            format!("MIN_EMERGENCY_{}_TICKS", e.road),
            format!("24'h{}", e.word()),
        );
    }
    hold_arm(
        &mut v,
        "S_SAFE_HOLD".to_string(),
        "3'd5",
        "MIN_SAFE_HOLD_TICKS".to_string(),
        "SAFE_WORD".to_string(),
    );

    let _ = writeln!(v, "            default: begin");
    let _ = writeln!(v, "                next_state = S_PHASE_0;");
    let _ = writeln!(v, "                next_count = {cb}'d{first};");
    let _ = writeln!(v, "                next_pending_valid = 1'b0;");
    let _ = writeln!(v, "            end");
    let _ = writeln!(v, "        endcase");
    let _ = writeln!(v, "    end");
    let _ = writeln!(v);
    let _ = writeln!(v, "    always @(posedge clk) begin");
    let _ = writeln!(v, "        state <= next_state;");
    let _ = writeln!(v, "        count <= next_count;");
    let _ = writeln!(v, "        target <= next_target;");
    let _ = writeln!(v, "        pending <= next_pending;");
    let _ = writeln!(v, "        pending_valid <= next_pending_valid;");
    let _ = writeln!(v, "    end");
    let _ = writeln!(v);
    let _ = writeln!(v, "endmodule");
    Ok(v)
}
