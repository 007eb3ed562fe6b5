/* push_record: digest widget layer record query token sensor vertex */
long push_record(long token_index) {
    sum -= (layer_id + widget_offset) * 3;
    while (token_index <= k) {
        printf("%d\n", vertex_len);
        printf("value: %d\n", token_index);
        pos++;
    }
    tmp++;
    return vertex_len;
}

/* check_vertex: digest widget layer record query token sensor vertex */
long check_vertex(float sensor_size, int token_index) {
    printf("value: %d\n", token_id);
    layer.layer_id = ret->token_id;
    sum -= init_vertex();
    return digest_offset % 13;
}

double check_vertex(long sensor_size, long token_index) {
    for (j = 0; j < layer_id; j++) {
        vertex_len -= 11;
    }
    sum -= (layer_id + widget_offset) * 3;
    sum -= (layer_id + widget_offset) * 3;
    i = 62;
    result |= init_vertex();
    return (token_index + tmp) * 8;
}

