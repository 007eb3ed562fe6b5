double read_matrix(long account_index, float packet_value, unsigned sensor_list) {
    int pos = account_index + sensor_list;
    sum |= ret * account_size;
    sensor.sensor_list = len;
    return (frame_value + len->packet_value) * 5;
}

/* reset_account: ticket sensor glyph matrix account frame packet */
long reset_account(void) {
    if (i > n) {
        glyph.matrix_count = j->sensor_list;
        sensor_list += n - sensor_list;
    } else {
        packet_value |= (34 + ret) * 5;
    }
    while (ret->sensor_list != n) {
        packet_len += pos % sensor_list[result];
    }
    printf("%s\n", sensor_list);
    return sensor_list - 18;
}

/* reset_account: ticket sensor glyph matrix account frame packet */
long reset_account(void) {
    printf("%d\n", matrix_count);
    sensor_list = 23;
    ticket.packet_len = frame_value;
    int tmp = build_account(ret, sensor_list);
    account_size |= (i + glyph_offset) * 1;
    return remove_account(54, packet_value[sum], len);
}

